#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "latrec/json_io.hpp"
#include "latrec/models.hpp"
#include "latrec/recovery.hpp"

namespace latrec {

enum class PrecisionPolicy { Fixed, Heuristic, Theoretical, Ladder };
enum class ExperimentTask { Recover, Ambiguity };

inline const char* to_string(PrecisionPolicy p) {
  switch (p) {
    case PrecisionPolicy::Fixed: return "fixed";
    case PrecisionPolicy::Heuristic: return "heuristic";
    case PrecisionPolicy::Theoretical: return "theoretical";
    case PrecisionPolicy::Ladder: return "ladder";
  }
  return "unknown";
}

inline PrecisionPolicy policy_from_string(const std::string& s) {
  if (s == "fixed") return PrecisionPolicy::Fixed;
  if (s == "heuristic") return PrecisionPolicy::Heuristic;
  if (s == "theoretical") return PrecisionPolicy::Theoretical;
  if (s == "ladder") return PrecisionPolicy::Ladder;
  throw std::invalid_argument("unknown precision policy: " + s);
}

inline const char* to_string(ExperimentTask t) {
  return t == ExperimentTask::Recover ? "recover" : "ambiguity";
}

inline ExperimentTask task_from_string(const std::string& s) {
  if (s == "recover") return ExperimentTask::Recover;
  if (s == "ambiguity") return ExperimentTask::Ambiguity;
  throw std::invalid_argument("unknown experiment task: " + s);
}

struct ExperimentConfig {
  ModelSpec base;  // d, n and covariance dimension are overridden per cell
  std::vector<std::size_t> d_values;
  int n_offset = 1;  // n = d + n_offset unless n_absolute is set
  bool n_absolute = false;
  std::size_t n_value = 0;
  std::size_t trials = 50;
  std::uint64_t base_seed = 1;
  ExperimentTask task = ExperimentTask::Recover;
  PrecisionPolicy policy = PrecisionPolicy::Heuristic;
  std::int64_t fixed_bits = 0;  // used by the fixed policy only
  mpq_class delta = mpq_class(99, 100);
  std::size_t threads = 1;
  std::string out_path;
};

struct TrialRecord {
  std::size_t cell = 0;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t stream = 0;
  std::string status;
  bool verified = false;
  std::int64_t us_sample = 0;
  std::int64_t us_solve = 0;
  std::int64_t us_lll = 0;
  std::int64_t us_extract = 0;
  std::int64_t precision_bits = 0;  // last N attempted
  std::size_t attempts = 0;
  std::size_t max_basis_bits = 0;
  std::uint64_t lll_swaps = 0;
};

struct CellSummary {
  std::size_t cell = 0;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t trials_run = 0;
  std::size_t successes = 0;  // status SUCCESS
  std::size_t verified = 0;   // SUCCESS and matches the planted frame
  double rate = 0.0;          // verified / trials_run
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<CellSummary> summaries;
};

// 95% Wilson score interval for s successes out of n.
inline std::pair<double, double> wilson_interval(std::size_t s, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  double p = static_cast<double>(s) / static_cast<double>(n);
  double nn = static_cast<double>(n);
  double denom = 1.0 + z * z / nn;
  double center = (p + z * z / (2.0 * nn)) / denom;
  double half =
      z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  double lo = center - half, hi = center + half;
  return {lo < 0.0 ? 0.0 : lo, hi > 1.0 ? 1.0 : hi};
}

// N values attempted for one trial: strictly increasing, capped at the
// theoretical worst case. Only FAIL_DIAGNOSTIC moves to the next rung.
inline std::vector<std::int64_t> precision_plan(PrecisionPolicy policy,
                                                std::int64_t fixed_bits,
                                                std::size_t d) {
  switch (policy) {
    case PrecisionPolicy::Fixed:
      if (fixed_bits < 1) throw std::invalid_argument("fixed policy needs bits");
      return {fixed_bits};
    case PrecisionPolicy::Heuristic:
      return {heuristic_precision_bits(d)};
    case PrecisionPolicy::Theoretical:
      return {theoretical_precision_bits(d)};
    case PrecisionPolicy::Ladder: {
      std::int64_t cap = theoretical_precision_bits(d);
      std::vector<std::int64_t> plan;
      for (std::int64_t n = heuristic_precision_bits(d); n < cap; n *= 2)
        plan.push_back(n);
      if (plan.empty() || plan.back() < cap) plan.push_back(cap);
      return plan;
    }
  }
  throw std::invalid_argument("unknown precision policy");
}

inline ModelInstance sample_instance(const ModelSpec& spec, RngStream& rng) {
  switch (spec.variant) {
    case ModelVariant::GaussianClustering: return sample_clustering(spec, rng);
    case ModelVariant::HCLWE: return sample_hclwe(spec, rng);
    case ModelVariant::PlantedSparseVector: return sample_planted_sparse(spec, rng);
    case ModelVariant::General: return sample_general(spec, rng);
  }
  throw std::invalid_argument("unknown model variant");
}

namespace detail {

inline std::int64_t elapsed_us(std::chrono::steady_clock::time_point from) {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now() - from)
      .count();
}

inline bool ambiguity_trial_verified(const ModelInstance& inst,
                                     const AmbiguityPair& pair) {
  const std::size_t d = inst.spec.d;
  auto rows = observation_rows(inst);
  mpq_class tol25(mpz_class(1), mpz_class(1) << 25);
  mpq_class tol40(mpz_class(1), mpz_class(1) << 40);
  mpq_class tol50(mpz_class(1), mpz_class(1) << 50);  // squared 2^-25
  bool distinct = false;
  bool matches_u = false;
  for (const auto* v : {&pair.first, &pair.second}) {
    mpq_class nrm(0);
    for (const auto& x : *v) nrm += x.to_rational() * x.to_rational();
    mpq_class unit_err = nrm - 1;
    if (unit_err < 0) unit_err = -unit_err;
    if (unit_err > tol40) return false;
    for (std::size_t i = 0; i + 1 < d; ++i) {
      DyadicScalar dot;
      for (std::size_t j = 0; j < d; ++j) dot = dot + rows[i][j] * (*v)[j];
      mpq_class resid = dot.to_rational() - inst.ground_truth_labels[i];
      if (resid < 0) resid = -resid;
      if (resid > tol25) return false;
    }
    mpq_class dist(0);
    for (std::size_t j = 0; j < d; ++j) {
      mpq_class e = (*v)[j].to_rational() -
                    inst.ground_truth_direction[j].to_rational();
      dist += e * e;
    }
    if (dist <= tol50) matches_u = true;
  }
  for (std::size_t j = 0; j < d; ++j)
    if (!(pair.first[j] == pair.second[j])) distinct = true;
  return distinct && matches_u;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t cell,
                             std::size_t d, std::size_t n, std::size_t trial) {
  TrialRecord rec;
  rec.cell = cell;
  rec.d = d;
  rec.n = n;
  rec.trial = trial;
  rec.stream = derive_stream_id(cell, trial);
  RngStream rng(cfg.base_seed, rec.stream);

  ModelSpec spec = cfg.base;
  spec.d = d;
  spec.n = n;
  if (spec.covariance.d != d) spec.covariance = unit_covariance(d);

  try {
    auto t0 = std::chrono::steady_clock::now();
    ModelInstance inst = sample_instance(spec, rng);
    rec.us_sample = elapsed_us(t0);
    auto rows = observation_rows(inst);

    if (cfg.task == ExperimentTask::Ambiguity) {
      auto t1 = std::chrono::steady_clock::now();
      try {
        AmbiguityPair pair = ambiguity_pair(rows, inst.ground_truth_labels);
        rec.us_solve = elapsed_us(t1);
        rec.status = "SUCCESS";
        rec.verified = ambiguity_trial_verified(inst, pair);
      } catch (const std::invalid_argument&) {
        rec.us_solve = elapsed_us(t1);
        rec.status = "FAIL_SINGULAR";  // rank-deficient draw
      }
      rec.attempts = 1;
      return rec;
    }

    for (std::int64_t bits : precision_plan(cfg.policy, cfg.fixed_bits, d)) {
      RecoveryOutput out = recover(rows, inst.spec.a, bits, cfg.delta);
      ++rec.attempts;
      rec.precision_bits = bits;
      rec.us_solve += out.diagnostics.us_solve;
      rec.us_lll += out.diagnostics.us_lll;
      rec.us_extract += out.diagnostics.us_extract;
      if (out.diagnostics.lll.max_bits > rec.max_basis_bits)
        rec.max_basis_bits = out.diagnostics.lll.max_bits;
      rec.lll_swaps += out.diagnostics.lll.swaps;
      rec.status = to_string(out.status);
      if (out.status == RecoveryStatus::Success)
        rec.verified = verify_up_to_sign(out, inst);
      if (out.status != RecoveryStatus::FailDiagnostic) break;
    }
  } catch (const std::exception& e) {
    rec.status = std::string("ERROR:") + e.what();
    rec.verified = false;
  }
  return rec;
}

}  // namespace detail

inline std::size_t cell_sample_count(const ExperimentConfig& cfg, std::size_t d) {
  if (cfg.n_absolute) return cfg.n_value;
  long n = static_cast<long>(d) + cfg.n_offset;
  if (n < 1) throw std::invalid_argument("n rule yields a non-positive count");
  return static_cast<std::size_t>(n);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.d_values.empty()) throw std::invalid_argument("no d values");
  if (cfg.trials == 0) throw std::invalid_argument("trial count must be positive");
  for (std::size_t d : cfg.d_values) {
    std::size_t n = cell_sample_count(cfg, d);
    if (cfg.task == ExperimentTask::Ambiguity && n != d - 1)
      throw std::invalid_argument("ambiguity task needs n = d-1");
    if (cfg.task == ExperimentTask::Recover && n != d + 1)
      throw std::invalid_argument("recover task needs n = d+1");
  }

  const std::size_t cells = cfg.d_values.size();
  const std::size_t total = cells * cfg.trials;
  std::vector<TrialRecord> records(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      std::size_t cell = i / cfg.trials;
      std::size_t trial = i % cfg.trials;
      std::size_t d = cfg.d_values[cell];
      records[i] = detail::run_trial(cfg, cell, d, cell_sample_count(cfg, d), trial);
    }
  };
  std::size_t nthreads = cfg.threads == 0 ? 1 : cfg.threads;
  if (nthreads > total) nthreads = total;
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // records are already cell-major and trial-minor; sort anyway so the CSV
  // order is canonical by construction, not by scheduling accident
  std::sort(records.begin(), records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              return a.cell != b.cell ? a.cell < b.cell : a.trial < b.trial;
            });

  ExperimentResult res;
  res.records = std::move(records);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    CellSummary cs;
    cs.cell = cell;
    cs.d = cfg.d_values[cell];
    cs.n = cell_sample_count(cfg, cs.d);
    for (const auto& r : res.records) {
      if (r.cell != cell) continue;
      ++cs.trials_run;
      if (r.status == "SUCCESS") ++cs.successes;
      if (r.verified) ++cs.verified;
    }
    cs.rate = cs.trials_run
                  ? static_cast<double>(cs.verified) / static_cast<double>(cs.trials_run)
                  : 0.0;
    auto iv = wilson_interval(cs.verified, cs.trials_run);
    cs.wilson_lo = iv.first;
    cs.wilson_hi = iv.second;
    res.summaries.push_back(cs);
  }
  return res;
}

inline std::string summary_path_for(const std::string& out_path) {
  const std::string ext = ".csv";
  if (out_path.size() > ext.size() &&
      out_path.compare(out_path.size() - ext.size(), ext.size(), ext) == 0)
    return out_path.substr(0, out_path.size() - ext.size()) + ".summary.csv";
  return out_path + ".summary";
}

inline void write_records_csv(const std::string& path,
                              const std::vector<TrialRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema=1\n";
  out << "cell,d,n,trial,stream,status,verified,us_sample,us_solve,us_lll,"
         "us_extract,precision_bits,attempts,max_basis_bits,lll_swaps\n";
  for (const auto& r : records) {
    out << r.cell << ',' << r.d << ',' << r.n << ',' << r.trial << ','
        << r.stream << ',' << r.status << ',' << (r.verified ? 1 : 0) << ','
        << r.us_sample << ',' << r.us_solve << ',' << r.us_lll << ','
        << r.us_extract << ',' << r.precision_bits << ',' << r.attempts << ','
        << r.max_basis_bits << ',' << r.lll_swaps << '\n';
  }
  if (!out) throw std::runtime_error("write failed on " + path);
}

inline void write_summary_csv(const std::string& path,
                              const std::vector<CellSummary>& summaries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema=1\n";
  out << "cell,d,n,trials,successes,verified,rate,wilson_lo,wilson_hi\n";
  char buf[64];
  for (const auto& s : summaries) {
    out << s.cell << ',' << s.d << ',' << s.n << ',' << s.trials_run << ','
        << s.successes << ',' << s.verified;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", s.rate, s.wilson_lo,
                  s.wilson_hi);
    out << buf << '\n';
  }
  if (!out) throw std::runtime_error("write failed on " + path);
}

inline ExperimentResult run_experiment_to_files(const ExperimentConfig& cfg) {
  if (cfg.out_path.empty()) throw std::invalid_argument("output path required");
  ExperimentResult res = run_experiment(cfg);
  write_records_csv(cfg.out_path, res.records);
  write_summary_csv(summary_path_for(cfg.out_path), res.summaries);
  return res;
}

inline Json to_json(const ExperimentConfig& cfg) {
  Json nrule;
  if (cfg.n_absolute)
    nrule = Json{{"kind", "absolute"}, {"value", cfg.n_value}};
  else
    nrule = Json{{"kind", "offset"}, {"value", cfg.n_offset}};
  return Json{{"model", to_json(cfg.base)},
              {"d_values", cfg.d_values},
              {"n_rule", nrule},
              {"trials", cfg.trials},
              {"base_seed", cfg.base_seed},
              {"task", to_string(cfg.task)},
              {"precision_policy", to_string(cfg.policy)},
              {"precision_bits", cfg.fixed_bits},
              {"delta", to_json(cfg.delta)},
              {"threads", cfg.threads},
              {"out", cfg.out_path}};
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  cfg.base = model_spec_from_json(j.at("model"));
  cfg.d_values = j.at("d_values").get<std::vector<std::size_t>>();
  const Json& nrule = j.at("n_rule");
  std::string kind = nrule.at("kind").get<std::string>();
  if (kind == "absolute") {
    cfg.n_absolute = true;
    cfg.n_value = nrule.at("value").get<std::size_t>();
  } else if (kind == "offset") {
    cfg.n_absolute = false;
    cfg.n_offset = nrule.at("value").get<int>();
  } else {
    throw std::invalid_argument("unknown n rule: " + kind);
  }
  cfg.trials = j.at("trials").get<std::size_t>();
  cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
  cfg.task = task_from_string(j.at("task").get<std::string>());
  cfg.policy = policy_from_string(j.at("precision_policy").get<std::string>());
  cfg.fixed_bits = j.at("precision_bits").get<std::int64_t>();
  cfg.delta = rational_from_json(j.at("delta"));
  cfg.threads = j.at("threads").get<std::size_t>();
  cfg.out_path = j.at("out").get<std::string>();
  return cfg;
}

}  // namespace latrec
