#include <CLI11.hpp>

#include <cstring>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "latrec/experiment.hpp"
#include "latrec/lattice.hpp"

using latrec::DyadicScalar;
using latrec::IntVec;
using latrec::Json;
using latrec::Matrix;
using latrec::ModelInstance;
using latrec::ModelSpec;
using latrec::RecoveryOutput;
using latrec::RecoveryStatus;

namespace {

// exit codes: 0 success, 2 precondition or I/O error, 3..5 recovery failures,
// CLI11 reserves its own codes (>= 100) for usage errors
constexpr int kPreconditionExit = 2;

int status_exit_code(RecoveryStatus s) {
  switch (s) {
    case RecoveryStatus::Success: return 0;
    case RecoveryStatus::FailSingular: return 3;
    case RecoveryStatus::FailZeroDirection: return 4;
    case RecoveryStatus::FailDiagnostic: return 5;
  }
  return kPreconditionExit;
}

mpq_class parse_rational(const std::string& s) {
  mpq_class q;
  if (s.empty() || mpq_set_str(q.get_mpq_t(), s.c_str(), 10) != 0)
    throw std::invalid_argument("bad rational literal: " + s);
  if (q.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  q.canonicalize();
  return q;
}

DyadicScalar dyadic_from_rational(const mpq_class& q) {
  const mpz_class& den = q.get_den();
  mp_bitcnt_t low = mpz_scan1(den.get_mpz_t(), 0);
  if ((den >> low) != 1)
    throw std::invalid_argument("denominator must be a power of two");
  return DyadicScalar(q.get_num(), -static_cast<std::int64_t>(low));
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<std::vector<DyadicScalar>> matrix_rows(const Matrix& m) {
  std::vector<std::vector<DyadicScalar>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].resize(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

struct SampleArgs {
  std::string model = "gaussian_clustering";
  std::size_t d = 0;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string out;
  std::string a;
  std::string gamma;
  std::string rho;
  std::string label_gamma;
  std::string label_source;
  std::string explicit_labels;
  std::string eigenvalues;
  bool identity_rotation = false;
  std::int64_t round_bits = 0;
};

int do_sample(const SampleArgs& args) {
  ModelSpec spec;
  spec.variant = latrec::variant_from_string(args.model);
  spec.d = args.d;
  spec.n = args.n;
  spec.covariance = latrec::unit_covariance(args.d);
  if (!args.a.empty()) spec.a = dyadic_from_rational(parse_rational(args.a));
  if (!args.gamma.empty()) spec.gamma = parse_rational(args.gamma);
  if (!args.rho.empty()) spec.rho = parse_rational(args.rho);
  if (!args.label_gamma.empty()) spec.label_gamma = parse_rational(args.label_gamma);
  if (!args.label_source.empty())
    spec.labels = latrec::label_source_from_string(args.label_source);
  if (!args.explicit_labels.empty()) {
    spec.labels = latrec::LabelSource::Explicit;
    for (const auto& tok : split_csv(args.explicit_labels))
      spec.explicit_labels.push_back(latrec::mpz_from_string(tok));
  }
  if (!args.eigenvalues.empty()) {
    spec.covariance.eigenvalues.clear();
    for (const auto& tok : split_csv(args.eigenvalues))
      spec.covariance.eigenvalues.push_back(
          dyadic_from_rational(parse_rational(tok)));
    spec.covariance.description = "explicit spectrum";
  }
  spec.identity_rotation = args.identity_rotation;
  spec.adversarial_round_bits = args.round_bits;

  for (const auto& w : latrec::spec_warnings(spec))
    std::cerr << "warning: " << w << '\n';

  latrec::RngStream rng(args.seed, args.stream);
  ModelInstance inst = latrec::sample_instance(spec, rng);
  latrec::save_json(args.out, latrec::to_json(inst));
  std::cout << "wrote " << args.out << " model=" << args.model
            << " d=" << args.d << " n=" << args.n << " seed=" << args.seed
            << " stream=" << args.stream << '\n';
  return 0;
}

struct RecoverArgs {
  std::string in;
  std::string out;
  std::string a;
  std::string policy = "heuristic";
  std::int64_t bits = 0;
  std::string delta = "99/100";
  std::int64_t round_bits = 0;
};

int do_recover(const RecoverArgs& args) {
  Json j = latrec::load_json(args.in);
  std::vector<std::vector<DyadicScalar>> rows;
  DyadicScalar a(1);
  bool have_a = false;
  bool have_truth = false;
  ModelInstance inst;
  if (j.contains("observations")) {
    inst = latrec::instance_from_json(j);
    rows = latrec::observation_rows(inst);
    a = inst.spec.a;
    have_a = true;
    have_truth = true;
  } else if (j.contains("samples")) {
    rows = matrix_rows(latrec::matrix_from_json(j.at("samples")));
    if (j.contains("a")) {
      a = latrec::dyadic_from_json(j.at("a"));
      have_a = true;
    }
  } else {
    throw std::invalid_argument("input is neither an instance nor a samples file");
  }
  if (!args.a.empty()) {
    a = dyadic_from_rational(parse_rational(args.a));
    have_a = true;
  }
  if (!have_a) throw std::invalid_argument("spacing a not given by file or flag");
  if (rows.empty()) throw std::invalid_argument("no samples in input");
  if (args.round_bits > 0)
    for (auto& r : rows)
      for (auto& x : r) x = x.truncate_bits(args.round_bits);

  auto plan = latrec::precision_plan(latrec::policy_from_string(args.policy),
                                     args.bits, rows[0].size());
  mpq_class delta = parse_rational(args.delta);
  RecoveryOutput out;
  std::vector<std::int64_t> attempted;
  for (std::int64_t bits : plan) {
    out = latrec::recover(rows, a, bits, delta);
    attempted.push_back(bits);
    if (out.status != RecoveryStatus::FailDiagnostic) break;
  }
  bool verified = have_truth && out.status == RecoveryStatus::Success &&
                  latrec::verify_up_to_sign(out, inst);

  Json oj = latrec::to_json(out);
  oj["attempted_bits"] = attempted;
  if (have_truth) oj["verified"] = verified;
  if (!args.out.empty()) latrec::save_json(args.out, oj);
  std::cout << "status=" << latrec::to_string(out.status)
            << " attempts=" << attempted.size()
            << " precision_bits=" << attempted.back()
            << " lll_swaps=" << out.diagnostics.lll.swaps;
  if (have_truth) std::cout << " verified=" << (verified ? 1 : 0);
  std::cout << '\n';
  return status_exit_code(out.status);
}

struct ExperimentArgs {
  std::string config;
  std::string out;
  std::size_t threads = 0;  // 0 keeps the config value
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int do_experiment(const ExperimentArgs& args) {
  latrec::ExperimentConfig cfg =
      latrec::config_from_json(latrec::load_json(args.config));
  if (!args.out.empty()) cfg.out_path = args.out;
  if (args.threads > 0) cfg.threads = args.threads;
  if (args.seed_set) cfg.base_seed = args.seed;
  latrec::ExperimentResult res = latrec::run_experiment_to_files(cfg);
  for (const auto& s : res.summaries) {
    std::printf("cell=%zu d=%zu n=%zu trials=%zu verified=%zu rate=%.4f "
                "wilson=[%.4f,%.4f]\n",
                s.cell, s.d, s.n, s.trials_run, s.verified, s.rate, s.wilson_lo,
                s.wilson_hi);
  }
  std::cout << "wrote " << cfg.out_path << " and "
            << latrec::summary_path_for(cfg.out_path) << '\n';
  return 0;
}

struct LllArgs {
  std::string in;
  std::string out;
  std::string delta = "99/100";
};

int do_lll(const LllArgs& args) {
  latrec::IntMat vecs = latrec::basis_from_json(latrec::load_json(args.in));
  latrec::LatticeBasis basis{vecs.size(), vecs};
  latrec::ReductionResult res = latrec::lll_reduce(basis, parse_rational(args.delta));
  Json oj{{"reduced", latrec::basis_to_json(res.reduced.vectors)},
          {"transform", latrec::basis_to_json(res.transform)},
          {"stats",
           Json{{"swaps", res.stats.swaps},
                {"size_reductions", res.stats.size_reductions},
                {"max_bits", res.stats.max_bits},
                {"wall_ms", res.stats.wall_ms}}}};
  if (!args.out.empty()) latrec::save_json(args.out, oj);
  std::printf("swaps=%llu size_reductions=%llu max_bits=%zu wall_ms=%.3f\n",
              static_cast<unsigned long long>(res.stats.swaps),
              static_cast<unsigned long long>(res.stats.size_reductions),
              res.stats.max_bits, res.stats.wall_ms);
  return 0;
}

struct RelationArgs {
  std::string in;
  std::string out;
  std::int64_t bits = 0;
  std::int64_t big_m_bits = 0;  // 0 means 2 * value count
  std::string norm_bound = "65536";
  std::string delta = "99/100";
};

int do_relation(const RelationArgs& args) {
  Json j = latrec::load_json(args.in);
  std::vector<DyadicScalar> values;
  for (const auto& e : j.at("values")) {
    if (e.contains("m"))
      values.push_back(latrec::dyadic_from_json(e));
    else
      values.push_back(dyadic_from_rational(latrec::rational_from_json(e)));
  }
  std::int64_t mbits = args.big_m_bits > 0
                           ? args.big_m_bits
                           : 2 * static_cast<std::int64_t>(values.size());
  mpz_class big_m = mpz_class(1) << mbits;
  mpz_class bound = latrec::mpz_from_string(args.norm_bound);
  auto rel = latrec::find_integer_relation(values, args.bits, big_m, bound,
                                           parse_rational(args.delta));
  Json oj;
  if (rel) {
    oj["relation"] = latrec::to_json(*rel);
    std::cout << "relation:";
    for (const auto& c : *rel) std::cout << ' ' << c.get_str();
    std::cout << '\n';
  } else {
    oj["relation"] = nullptr;
    std::cout << "none\n";
  }
  if (!args.out.empty()) latrec::save_json(args.out, oj);
  return 0;
}

struct AmbiguityArgs {
  std::string in;
  std::string out;
};

int do_ambiguity(const AmbiguityArgs& args) {
  ModelInstance inst = latrec::instance_from_json(latrec::load_json(args.in));
  auto rows = latrec::observation_rows(inst);
  latrec::AmbiguityPair pair;
  try {
    pair = latrec::ambiguity_pair(rows, inst.ground_truth_labels);
  } catch (const std::invalid_argument& e) {
    if (std::strstr(e.what(), "rank deficient") != nullptr) {
      std::cerr << "error: " << e.what() << '\n';
      return 3;
    }
    throw;
  }
  Json oj{{"first", latrec::dyadic_vector_to_json(pair.first)},
          {"second", latrec::dyadic_vector_to_json(pair.second)}};
  if (!args.out.empty()) latrec::save_json(args.out, oj);
  std::cout << "ambiguity pair for d=" << inst.spec.d
            << " n=" << inst.spec.n << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact-arithmetic lattice toolkit for noiseless mixture recovery"};
  app.require_subcommand(1);
  int rc = 0;

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "draw a model instance to JSON");
  sample->add_option("--model", sa.model,
                     "gaussian_clustering | general | hclwe | planted_sparse_vector");
  sample->add_option("-d,--dim", sa.d, "ambient dimension")->required();
  sample->add_option("-n,--samples", sa.n, "sample count")->required();
  sample->add_option("--seed", sa.seed, "rng seed");
  sample->add_option("--stream", sa.stream, "rng stream id");
  sample->add_option("--out", sa.out, "output instance file")->required();
  sample->add_option("--a", sa.a, "spacing (rational, dyadic)");
  sample->add_option("--gamma", sa.gamma, "hclwe width (rational)");
  sample->add_option("--rho", sa.rho, "planted sparse density (rational)");
  sample->add_option("--label-gamma", sa.label_gamma,
                     "discrete Gaussian width for general labels");
  sample->add_option("--label-source", sa.label_source,
                     "rademacher | discrete_gaussian | explicit");
  sample->add_option("--explicit-labels", sa.explicit_labels,
                     "comma separated integers");
  sample->add_option("--eigenvalues", sa.eigenvalues,
                     "comma separated noise spectrum (d-1 dyadic rationals)");
  sample->add_flag("--identity-rotation", sa.identity_rotation,
                   "skip the hidden rotation");
  sample->add_option("--adversarial-round-bits", sa.round_bits,
                     "truncate observations to this many fractional bits");
  sample->callback([&]() { rc = do_sample(sa); });

  RecoverArgs ra;
  auto* recover = app.add_subcommand("recover", "run recovery on an instance");
  recover->add_option("--in", ra.in, "instance or samples file")->required();
  recover->add_option("--out", ra.out, "output file for the recovery record");
  recover->add_option("--a", ra.a, "spacing override (rational, dyadic)");
  recover->add_option("--precision-policy", ra.policy,
                      "fixed | heuristic | theoretical | ladder");
  recover->add_option("--precision-bits", ra.bits, "bits for the fixed policy");
  recover->add_option("--delta", ra.delta, "LLL delta (rational)");
  recover->add_option("--adversarial-round-bits", ra.round_bits,
                      "truncate samples before recovery");
  recover->callback([&]() { rc = do_recover(ra); });

  ExperimentArgs ea;
  auto* experiment = app.add_subcommand("experiment", "run a trial sweep from a config");
  experiment->add_option("--config", ea.config, "experiment config file")->required();
  experiment->add_option("--out", ea.out, "override the CSV output path");
  experiment->add_option("--threads", ea.threads, "override the worker count");
  experiment->add_option("--seed", ea.seed, "override the base seed")
      ->each([&](const std::string&) { ea.seed_set = true; });
  experiment->callback([&]() { rc = do_experiment(ea); });

  LllArgs la;
  auto* lll = app.add_subcommand("lll", "reduce an integer basis");
  lll->add_option("--in", la.in, "basis file")->required();
  lll->add_option("--out", la.out, "output file for the reduction");
  lll->add_option("--delta", la.delta, "LLL delta (rational)");
  lll->callback([&]() { rc = do_lll(la); });

  RelationArgs rla;
  auto* relation = app.add_subcommand("relation", "search for an integer relation");
  relation->add_option("--in", rla.in, "values file")->required();
  relation->add_option("--out", rla.out, "output file for the relation");
  relation->add_option("--precision-bits", rla.bits, "truncation bits N")->required();
  relation->add_option("--big-m-bits", rla.big_m_bits,
                       "penalty scale M = 2^bits (default 2 * count)");
  relation->add_option("--norm-bound", rla.norm_bound,
                       "coefficient norm bound (decimal integer)");
  relation->add_option("--delta", rla.delta, "LLL delta (rational)");
  relation->callback([&]() { rc = do_relation(rla); });

  AmbiguityArgs aa;
  auto* ambiguity =
      app.add_subcommand("ambiguity", "both unit directions consistent with n = d-1 labels");
  ambiguity->add_option("--in", aa.in, "instance file")->required();
  ambiguity->add_option("--out", aa.out, "output file for the pair");
  ambiguity->callback([&]() { rc = do_ambiguity(aa); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPreconditionExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPreconditionExit;
  }
  return rc;
}
