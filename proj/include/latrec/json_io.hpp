#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "latrec/models.hpp"
#include "latrec/recovery.hpp"

namespace latrec {

using Json = nlohmann::json;

inline mpz_class mpz_from_string(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty integer literal");
  mpz_class z;
  if (mpz_set_str(z.get_mpz_t(), s.c_str(), 10) != 0)
    throw std::invalid_argument("bad integer literal: " + s);
  return z;
}

inline Json to_json(const DyadicScalar& x) {
  return Json{{"m", x.mantissa().get_str()}, {"e", x.exponent()}};
}

inline DyadicScalar dyadic_from_json(const Json& j) {
  return DyadicScalar(mpz_from_string(j.at("m").get<std::string>()),
                      j.at("e").get<std::int64_t>());
}

inline Json to_json(const mpq_class& q) {
  return Json{{"n", q.get_num().get_str()}, {"d", q.get_den().get_str()}};
}

inline mpq_class rational_from_json(const Json& j) {
  mpz_class den = mpz_from_string(j.at("d").get<std::string>());
  if (den == 0) throw std::invalid_argument("zero denominator");
  mpq_class q(mpz_from_string(j.at("n").get<std::string>()), den);
  q.canonicalize();
  return q;
}

inline Json to_json(const Matrix& m) {
  Json entries = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
    entries.push_back(std::move(row));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

inline Matrix matrix_from_json(const Json& j) {
  std::size_t r = j.at("rows").get<std::size_t>();
  std::size_t c = j.at("cols").get<std::size_t>();
  const Json& entries = j.at("entries");
  if (entries.size() != r) throw std::invalid_argument("matrix row count mismatch");
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (entries[i].size() != c)
      throw std::invalid_argument("matrix column count mismatch");
    for (std::size_t k = 0; k < c; ++k) m(i, k) = dyadic_from_json(entries[i][k]);
  }
  return m;
}

inline Json to_json(const IntVec& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(x.get_str());
  return a;
}

inline IntVec intvec_from_json(const Json& j) {
  IntVec v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(mpz_from_string(e.get<std::string>()));
  return v;
}

inline Json basis_to_json(const IntMat& b) {
  Json vecs = Json::array();
  for (const auto& v : b) {
    Json row = Json::array();
    for (const auto& x : v) row.push_back(x.get_str());
    vecs.push_back(std::move(row));
  }
  return Json{{"dim", b.size()}, {"vectors", vecs}};
}

inline IntMat basis_from_json(const Json& j) {
  std::size_t dim = j.at("dim").get<std::size_t>();
  const Json& vecs = j.at("vectors");
  if (vecs.size() != dim) throw std::invalid_argument("basis vector count mismatch");
  IntMat b(dim);
  for (std::size_t i = 0; i < dim; ++i) b[i] = intvec_from_json(vecs[i]);
  return b;
}

inline Json dyadic_vector_to_json(const std::vector<DyadicScalar>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(to_json(x));
  return a;
}

inline std::vector<DyadicScalar> dyadic_vector_from_json(const Json& j) {
  std::vector<DyadicScalar> v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(dyadic_from_json(e));
  return v;
}

inline const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::General: return "general";
    case ModelVariant::PlantedSparseVector: return "planted_sparse_vector";
    case ModelVariant::HCLWE: return "hclwe";
    case ModelVariant::GaussianClustering: return "gaussian_clustering";
  }
  return "unknown";
}

inline ModelVariant variant_from_string(const std::string& s) {
  if (s == "general") return ModelVariant::General;
  if (s == "planted_sparse_vector") return ModelVariant::PlantedSparseVector;
  if (s == "hclwe") return ModelVariant::HCLWE;
  if (s == "gaussian_clustering") return ModelVariant::GaussianClustering;
  throw std::invalid_argument("unknown model variant: " + s);
}

inline const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Rademacher: return "rademacher";
    case LabelSource::DiscreteGaussianLabels: return "discrete_gaussian";
    case LabelSource::Explicit: return "explicit";
  }
  return "unknown";
}

inline LabelSource label_source_from_string(const std::string& s) {
  if (s == "rademacher") return LabelSource::Rademacher;
  if (s == "discrete_gaussian") return LabelSource::DiscreteGaussianLabels;
  if (s == "explicit") return LabelSource::Explicit;
  throw std::invalid_argument("unknown label source: " + s);
}

inline RecoveryStatus status_from_string(const std::string& s) {
  if (s == "SUCCESS") return RecoveryStatus::Success;
  if (s == "FAIL_SINGULAR") return RecoveryStatus::FailSingular;
  if (s == "FAIL_ZERO_DIRECTION") return RecoveryStatus::FailZeroDirection;
  if (s == "FAIL_DIAGNOSTIC") return RecoveryStatus::FailDiagnostic;
  throw std::invalid_argument("unknown recovery status: " + s);
}

inline Json to_json(const CovarianceSpec& c) {
  return Json{{"d", c.d},
              {"eigenvalues", dyadic_vector_to_json(c.eigenvalues)},
              {"description", c.description},
              {"separability_exponent", c.separability_exponent}};
}

inline CovarianceSpec covariance_from_json(const Json& j) {
  CovarianceSpec c;
  c.d = j.at("d").get<std::size_t>();
  c.eigenvalues = dyadic_vector_from_json(j.at("eigenvalues"));
  c.description = j.value("description", std::string());
  c.separability_exponent = j.value("separability_exponent", 2);
  return c;
}

inline Json to_json(const ModelSpec& s) {
  return Json{{"variant", to_string(s.variant)},
              {"d", s.d},
              {"n", s.n},
              {"a", to_json(s.a)},
              {"labels", to_string(s.labels)},
              {"explicit_labels", to_json(s.explicit_labels)},
              {"label_gamma", to_json(s.label_gamma)},
              {"rho", to_json(s.rho)},
              {"gamma", to_json(s.gamma)},
              {"covariance", to_json(s.covariance)},
              {"identity_rotation", s.identity_rotation},
              {"adversarial_round_bits", s.adversarial_round_bits}};
}

inline ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec s;
  s.variant = variant_from_string(j.at("variant").get<std::string>());
  s.d = j.at("d").get<std::size_t>();
  s.n = j.at("n").get<std::size_t>();
  s.a = dyadic_from_json(j.at("a"));
  s.labels = label_source_from_string(j.at("labels").get<std::string>());
  s.explicit_labels = intvec_from_json(j.at("explicit_labels"));
  s.label_gamma = rational_from_json(j.at("label_gamma"));
  s.rho = rational_from_json(j.at("rho"));
  s.gamma = rational_from_json(j.at("gamma"));
  s.covariance = covariance_from_json(j.at("covariance"));
  s.identity_rotation = j.at("identity_rotation").get<bool>();
  s.adversarial_round_bits = j.at("adversarial_round_bits").get<std::int64_t>();
  return s;
}

inline Json to_json(const ModelInstance& inst) {
  Json j{{"spec", to_json(inst.spec)},
         {"seed", inst.seed},
         {"stream", inst.stream},
         {"observations", to_json(inst.observations)},
         {"labels", to_json(inst.ground_truth_labels)},
         {"direction", dyadic_vector_to_json(inst.ground_truth_direction)},
         {"rotation", to_json(inst.rotation)}};
  if (inst.subspace_matrix.rows() > 0) {
    j["subspace_matrix"] = to_json(inst.subspace_matrix);
    j["subspace_row_scale"] = to_json(inst.subspace_row_scale);
  }
  return j;
}

inline ModelInstance instance_from_json(const Json& j) {
  ModelInstance inst;
  inst.spec = model_spec_from_json(j.at("spec"));
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.stream = j.at("stream").get<std::uint64_t>();
  inst.observations = matrix_from_json(j.at("observations"));
  inst.ground_truth_labels = intvec_from_json(j.at("labels"));
  inst.ground_truth_direction = dyadic_vector_from_json(j.at("direction"));
  inst.rotation = matrix_from_json(j.at("rotation"));
  if (j.contains("subspace_matrix")) {
    inst.subspace_matrix = matrix_from_json(j.at("subspace_matrix"));
    inst.subspace_row_scale = dyadic_from_json(j.at("subspace_row_scale"));
  }
  return inst;
}

inline Json to_json(const RecoveryOutput& out) {
  return Json{
      {"status", to_string(out.status)},
      {"labels", to_json(out.labels)},
      {"direction", dyadic_vector_to_json(out.direction)},
      {"diagnostics",
       Json{{"lambda_max_bits", out.diagnostics.lambda_max_bits},
            {"lll_swaps", out.diagnostics.lll.swaps},
            {"lll_size_reductions", out.diagnostics.lll.size_reductions},
            {"lll_max_bits", out.diagnostics.lll.max_bits},
            {"lll_wall_ms", out.diagnostics.lll.wall_ms},
            {"coeff_gcd", out.diagnostics.coeff_gcd.get_str()},
            {"first_sample_residual", to_json(out.diagnostics.first_sample_residual)},
            {"precision_bits", out.diagnostics.precision_bits},
            {"us_solve", out.diagnostics.us_solve},
            {"us_lll", out.diagnostics.us_lll},
            {"us_extract", out.diagnostics.us_extract},
            {"note", out.diagnostics.note}}}};
}

inline RecoveryOutput recovery_output_from_json(const Json& j) {
  RecoveryOutput out;
  out.status = status_from_string(j.at("status").get<std::string>());
  out.labels = intvec_from_json(j.at("labels"));
  out.direction = dyadic_vector_from_json(j.at("direction"));
  const Json& dg = j.at("diagnostics");
  out.diagnostics.lambda_max_bits = dg.at("lambda_max_bits").get<std::size_t>();
  out.diagnostics.lll.swaps = dg.at("lll_swaps").get<std::uint64_t>();
  out.diagnostics.lll.size_reductions =
      dg.at("lll_size_reductions").get<std::uint64_t>();
  out.diagnostics.lll.max_bits = dg.at("lll_max_bits").get<std::size_t>();
  out.diagnostics.lll.wall_ms = dg.at("lll_wall_ms").get<double>();
  out.diagnostics.coeff_gcd = mpz_from_string(dg.at("coeff_gcd").get<std::string>());
  out.diagnostics.first_sample_residual =
      dyadic_from_json(dg.at("first_sample_residual"));
  out.diagnostics.precision_bits = dg.at("precision_bits").get<std::int64_t>();
  out.diagnostics.us_solve = dg.at("us_solve").get<std::int64_t>();
  out.diagnostics.us_lll = dg.at("us_lll").get<std::int64_t>();
  out.diagnostics.us_extract = dg.at("us_extract").get<std::int64_t>();
  out.diagnostics.note = dg.at("note").get<std::string>();
  return out;
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed on " + path);
}

}  // namespace latrec
