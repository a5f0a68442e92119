#pragma once

#include <gmpxx.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "latrec/lattice.hpp"
#include "latrec/linalg.hpp"
#include "latrec/models.hpp"

namespace latrec {

enum class RecoveryStatus {
  Success,
  FailSingular,
  FailZeroDirection,
  FailDiagnostic
};

inline const char* to_string(RecoveryStatus s) {
  switch (s) {
    case RecoveryStatus::Success: return "SUCCESS";
    case RecoveryStatus::FailSingular: return "FAIL_SINGULAR";
    case RecoveryStatus::FailZeroDirection: return "FAIL_ZERO_DIRECTION";
    case RecoveryStatus::FailDiagnostic: return "FAIL_DIAGNOSTIC";
  }
  return "UNKNOWN";
}

struct RecoveryDiagnostics {
  std::size_t lambda_max_bits = 0;  // widest numerator or denominator seen
  ReductionStats lll;
  mpz_class coeff_gcd;                 // gcd of the recovered label combination
  DyadicScalar first_sample_residual;  // |<z1, u> - a x1|
  std::int64_t precision_bits = 0;
  std::int64_t us_solve = 0;  // kernel coefficient solve
  std::int64_t us_lll = 0;
  std::int64_t us_extract = 0;  // direction solve plus integrality checks
  std::string note;
};

struct RecoveryOutput {
  RecoveryStatus status = RecoveryStatus::FailDiagnostic;
  IntVec labels;                        // length d+1 on success
  std::vector<DyadicScalar> direction;  // unit to 2^-40 on success
  RecoveryDiagnostics diagnostics;
};

inline std::int64_t heuristic_precision_bits(std::size_t d) {
  std::int64_t h = 16 * static_cast<std::int64_t>(d) * static_cast<std::int64_t>(d);
  return h < 256 ? 256 : h;
}

inline std::int64_t theoretical_precision_bits(std::size_t d) {
  if (d < 2) return 256;
  double logd = std::log(static_cast<double>(d));
  double v = std::pow(static_cast<double>(d), 4.0) * logd * logd;
  return static_cast<std::int64_t>(std::ceil(v));
}

// The LLL-based recovery pipeline for n = d+1 samples: exact kernel
// coefficients, truncated relation lattice, reduction, and the exact linear
// solve that turns the shortest relation back into labels and a direction.
inline RecoveryOutput recover(const std::vector<std::vector<DyadicScalar>>& samples,
                              const DyadicScalar& a, std::int64_t precision_bits,
                              const mpq_class& delta = mpq_class(99, 100)) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const std::size_t d = samples[0].size();
  if (d == 0) throw std::invalid_argument("empty sample vectors");
  if (samples.size() != d + 1)
    throw std::invalid_argument("need exactly d+1 samples");
  for (const auto& s : samples)
    if (s.size() != d) throw std::invalid_argument("ragged sample list");
  if (!(a.to_rational() > 0)) throw std::invalid_argument("spacing must be positive");
  if (precision_bits < 1) throw std::invalid_argument("precision must be positive");

  RecoveryOutput out;
  out.diagnostics.precision_bits = precision_bits;
  auto tick = std::chrono::steady_clock::now();
  auto lap = [&tick]() {
    auto now = std::chrono::steady_clock::now();
    auto us =
        std::chrono::duration_cast<std::chrono::microseconds>(now - tick).count();
    tick = now;
    return static_cast<std::int64_t>(us);
  };

  Matrix z(d, d);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = 0; r < d; ++r) z(r, c) = samples[c + 1][r];
  if (exact_det(z) == 0) {
    out.status = RecoveryStatus::FailSingular;
    out.diagnostics.note = "observation matrix is singular";
    out.diagnostics.us_solve = lap();
    return out;
  }

  RatVec rhs(d);
  for (std::size_t r = 0; r < d; ++r) rhs[r] = -samples[0][r].to_rational();
  auto tail = exact_solve(z, rhs);
  RatVec lambdas(d + 1);
  lambdas[0] = 1;
  for (std::size_t i = 0; i < d; ++i) {
    lambdas[i + 1] = (*tail)[i];
    std::size_t nb = mpz_sizeinbase(lambdas[i + 1].get_num().get_mpz_t(), 2);
    std::size_t db = mpz_sizeinbase(lambdas[i + 1].get_den().get_mpz_t(), 2);
    std::size_t w = nb > db ? nb : db;
    if (w > out.diagnostics.lambda_max_bits) out.diagnostics.lambda_max_bits = w;
  }

  out.diagnostics.us_solve = lap();

  mpz_class big_m = mpz_class(1) << (2 * d);
  RelationBasis rb = build_relation_basis(lambdas, precision_bits, big_m);
  ReductionResult red = lll_reduce(rb.basis, delta);
  out.diagnostics.lll = red.stats;
  out.diagnostics.us_lll = lap();

  const IntVec& shortest = red.reduced.vectors[0];
  if (shortest[0] != 0) {
    out.status = RecoveryStatus::FailDiagnostic;
    out.diagnostics.note = "shortest reduced vector is not a relation";
    out.diagnostics.us_extract = lap();
    return out;
  }
  IntVec coeff(d + 2);
  for (std::size_t i = 0; i < d + 2; ++i) coeff[i] = red.transform[i][0];

  bool tail_zero = true;
  for (std::size_t i = 1; i <= d; ++i)
    if (coeff[i] != 0) tail_zero = false;
  if (tail_zero) {
    out.status = RecoveryStatus::FailZeroDirection;
    out.diagnostics.note = "relation touches only the first sample";
    out.diagnostics.us_extract = lap();
    return out;
  }

  mpq_class a_rat = a.to_rational();
  RatVec dir_rhs(d);
  for (std::size_t i = 0; i < d; ++i) dir_rhs[i] = a_rat * coeff[i + 1];
  auto u_prime = exact_solve(z.transpose(), dir_rhs);

  mpq_class norm_sq_u(0);
  for (const auto& v : *u_prime) norm_sq_u += v * v;
  DyadicScalar inv_norm = detail::inv_sqrt(norm_sq_u, 160);
  mpq_class inv_norm_rat = inv_norm.to_rational();

  out.labels.resize(d + 1);
  mpq_class half(1, 2);
  mpq_class tol_label(mpz_class(1), mpz_class(1) << 20);
  for (std::size_t i = 0; i <= d; ++i) {
    mpq_class scaled = coeff[i] * inv_norm_rat;
    mpq_class shifted = scaled + half;
    mpz_class nearest;
    mpz_fdiv_q(nearest.get_mpz_t(), shifted.get_num().get_mpz_t(),
               shifted.get_den().get_mpz_t());
    mpq_class miss = scaled - nearest;
    if (miss < 0) miss = -miss;
    if (miss > tol_label) {
      out.status = RecoveryStatus::FailDiagnostic;
      out.diagnostics.note = "label estimate misses an integer";
      out.labels.clear();
      out.diagnostics.us_extract = lap();
      return out;
    }
    out.labels[i] = nearest;
  }

  out.direction.resize(d);
  for (std::size_t j = 0; j < d; ++j)
    out.direction[j] = truncate_bits((*u_prime)[j] * inv_norm_rat, 64);

  DyadicScalar unit_err = DyadicScalar(-1);
  for (const auto& v : out.direction) unit_err = unit_err + v * v;
  if (!(unit_err.abs() <= pow2(-41))) {
    out.status = RecoveryStatus::FailDiagnostic;
    out.diagnostics.note = "direction failed unit normalization";
    out.labels.clear();
    out.direction.clear();
    out.diagnostics.us_extract = lap();
    return out;
  }

  DyadicScalar first_dot;
  for (std::size_t j = 0; j < d; ++j)
    first_dot = first_dot + samples[0][j] * out.direction[j];
  DyadicScalar resid = (first_dot - a * DyadicScalar(out.labels[0])).abs();
  out.diagnostics.first_sample_residual = resid;
  if (!(resid <= pow2(-20))) {
    out.status = RecoveryStatus::FailDiagnostic;
    out.diagnostics.note = "first sample fails the consistency check";
    out.labels.clear();
    out.direction.clear();
    out.diagnostics.us_extract = lap();
    return out;
  }

  mpz_class g = 0;
  for (std::size_t i = 0; i <= d; ++i)
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), coeff[i].get_mpz_t());
  out.diagnostics.coeff_gcd = g;
  out.status = RecoveryStatus::Success;
  out.diagnostics.us_extract = lap();
  return out;
}

inline bool verify_up_to_sign(const RecoveryOutput& output,
                              const ModelInstance& truth) {
  if (output.status != RecoveryStatus::Success)
    throw std::invalid_argument("verification requires a successful recovery");
  const std::size_t d = truth.spec.d;
  if (truth.spec.n != d + 1 || output.labels.size() != d + 1 ||
      output.direction.size() != d)
    throw std::invalid_argument("shape mismatch");
  DyadicScalar bound_sq = pow2(-40);  // (2^-20)^2
  for (int eps : {1, -1}) {
    bool match = true;
    for (std::size_t i = 0; i <= d; ++i)
      if (output.labels[i] != eps * truth.ground_truth_labels[i]) {
        match = false;
        break;
      }
    if (!match) continue;
    DyadicScalar err_sq;
    for (std::size_t j = 0; j < d; ++j) {
      DyadicScalar diff = output.direction[j] -
                          DyadicScalar(eps) * truth.ground_truth_direction[j];
      err_sq = err_sq + diff * diff;
    }
    if (err_sq <= bound_sq) return true;
  }
  return false;
}

struct AmbiguityPair {
  std::vector<DyadicScalar> first;
  std::vector<DyadicScalar> second;
};

// With d-1 samples the labels pin the direction only up to the kernel line;
// both unit-sphere intersections of that line are returned.
inline AmbiguityPair ambiguity_pair(
    const std::vector<std::vector<DyadicScalar>>& samples, const IntVec& labels) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const std::size_t d = samples[0].size();
  if (samples.size() != d - 1)
    throw std::invalid_argument("need exactly d-1 samples");
  if (labels.size() != d - 1) throw std::invalid_argument("label count mismatch");
  Matrix a(d - 1, d);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    if (samples[i].size() != d) throw std::invalid_argument("ragged sample list");
    for (std::size_t j = 0; j < d; ++j) a(i, j) = samples[i][j];
  }
  auto kernel = kernel_line(a);
  if (!kernel) throw std::invalid_argument("samples are rank deficient");

  mpz_class lcm(1);
  for (const auto& y : *kernel)
    mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), y.get_den().get_mpz_t());
  IntVec y(d);
  for (std::size_t j = 0; j < d; ++j) {
    mpq_class scaled = (*kernel)[j] * lcm;
    y[j] = scaled.get_num();
  }

  // Particular solution with the kernel component pinned to zero.
  Matrix sys(d, d);
  RatVec rhs(d);
  for (std::size_t i = 0; i + 1 < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) sys(i, j) = a(i, j);
    rhs[i] = labels[i];
  }
  for (std::size_t j = 0; j < d; ++j) sys(d - 1, j) = DyadicScalar(y[j]);
  rhs[d - 1] = 0;
  auto v0 = exact_solve(sys, rhs);
  if (!v0) throw std::runtime_error("kernel-extended system unexpectedly singular");

  mpq_class alpha(0), beta(0), gamma(-1);
  for (std::size_t j = 0; j < d; ++j) {
    alpha += mpq_class(y[j]) * y[j];
    beta += 2 * (*v0)[j] * y[j];
    gamma += (*v0)[j] * (*v0)[j];
  }
  mpq_class disc = beta * beta - 4 * alpha * gamma;
  if (disc < 0) throw std::runtime_error("no real sphere intersection");
  mpq_class root = detail::dyadic_sqrt(disc, 192).to_rational();
  mpq_class t1 = (-beta + root) / (2 * alpha);
  mpq_class t2 = (-beta - root) / (2 * alpha);

  AmbiguityPair pair;
  pair.first.resize(d);
  pair.second.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    pair.first[j] = truncate_bits((*v0)[j] + t1 * y[j], 96);
    pair.second[j] = truncate_bits((*v0)[j] + t2 * y[j], 96);
  }
  return pair;
}

// det(Z) t_1 plus the sum of det(Z with column i-1 replaced by -z_1) t_i:
// the determinant statistic that vanishes exactly on integer relations.
inline mpq_class pt_polynomial(const std::vector<std::vector<DyadicScalar>>& samples,
                               const IntVec& t) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const std::size_t d = samples[0].size();
  if (samples.size() != d + 1 || t.size() != d + 1)
    throw std::invalid_argument("shape mismatch");
  Matrix z(d, d);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = 0; r < d; ++r) z(r, c) = samples[c + 1][r];
  mpq_class acc = exact_det(z) * t[0];
  for (std::size_t i = 1; i <= d; ++i) {
    Matrix zi = z;
    for (std::size_t r = 0; r < d; ++r) zi(r, i - 1) = -samples[0][r];
    acc += exact_det(zi) * t[i];
  }
  return acc;
}

namespace detail {

inline IntVec rounding_witness_impl(const RatVec& s, const IntVec& m,
                                    std::int64_t n_bits, const mpq_class& c_factor) {
  if (s.size() != m.size() || s.empty())
    throw std::invalid_argument("shape mismatch");
  mpq_class residual(0);
  for (std::size_t i = 0; i < s.size(); ++i) residual += s[i] * m[i];
  if (residual != 0)
    throw std::invalid_argument("input is not an exact relation");
  IntVec out(m.size() + 1);
  mpz_class last = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = m[i];
    last += m[i] * floor_scaled(s[i], n_bits);
  }
  out[m.size()] = -last;
  // ||m'||^2 <= C^2 d ||m||^2 with d the relation length.
  mpz_class lhs = 0, rhs = 0;
  for (const auto& v : out) lhs += v * v;
  for (const auto& v : m) rhs += v * v;
  mpq_class bound = c_factor * c_factor * static_cast<unsigned long>(s.size()) * rhs;
  if (mpq_class(lhs) > bound)
    throw std::logic_error("witness norm exceeds the configured bound");
  return out;
}

}  // namespace detail

inline IntVec rounding_lemma_witness(const std::vector<DyadicScalar>& s,
                                     const IntVec& m, std::int64_t n_bits,
                                     const mpq_class& c_factor = 8) {
  RatVec sr(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) sr[i] = s[i].to_rational();
  return detail::rounding_witness_impl(sr, m, n_bits, c_factor);
}

inline IntVec rounding_lemma_witness(const RatVec& s, const IntVec& m,
                                     std::int64_t n_bits,
                                     const mpq_class& c_factor = 8) {
  return detail::rounding_witness_impl(s, m, n_bits, c_factor);
}

// x^T (ZZ^T)^{-1} x as an exact rational, or nothing when the Gram matrix is
// not positive definite (checked through leading-minor signs).
inline std::optional<mpq_class> energy_fraction(const Matrix& observations,
                                                const IntVec& labels) {
  const std::size_t n = observations.rows();
  const std::size_t d = observations.cols();
  if (n == 0 || n >= d) throw std::invalid_argument("need 0 < n < d");
  if (labels.size() != n) throw std::invalid_argument("label count mismatch");
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      DyadicScalar acc;
      for (std::size_t k = 0; k < d; ++k)
        acc = acc + observations(i, k) * observations(j, k);
      h(i, j) = acc;
      h(j, i) = acc;
    }
  for (std::size_t k = 1; k <= n; ++k) {
    Matrix lead(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) lead(i, j) = h(i, j);
    if (!(exact_det(lead) > 0)) return std::nullopt;
  }
  RatVec rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = labels[i];
  auto w = exact_solve(h, rhs);
  mpq_class f(0);
  for (std::size_t i = 0; i < n; ++i) f += rhs[i] * (*w)[i];
  return f;
}

// log[(1 - x^T H^{-1} x)_+^{(d-n-2)/2}] dropping every x-independent factor.
inline double conditional_log_density(const Matrix& observations,
                                      const IntVec& labels) {
  for (const auto& x : labels)
    if (x != 1 && x != -1) throw std::invalid_argument("labels must be signs");
  auto f = energy_fraction(observations, labels);
  if (!f) return -std::numeric_limits<double>::infinity();
  mpq_class rem = 1 - *f;
  if (rem <= 0) return -std::numeric_limits<double>::infinity();
  double expo = 0.5 * (static_cast<double>(observations.cols()) -
                       static_cast<double>(observations.rows()) - 2.0);
  return expo * std::log(rem.get_d());
}

}  // namespace latrec
