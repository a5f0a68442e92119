#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <vector>

#include "latrec/dyadic.hpp"
#include "latrec/linalg.hpp"
#include "latrec/rng.hpp"

namespace latrec {

enum class ModelVariant { General, PlantedSparseVector, HCLWE, GaussianClustering };
enum class LabelSource { Rademacher, DiscreteGaussianLabels, Explicit };

struct CovarianceSpec {
  std::size_t d = 0;
  std::vector<DyadicScalar> eigenvalues;  // the d-1 nonzero spectrum values
  std::string description;
  int separability_exponent = 2;
};

inline CovarianceSpec unit_covariance(std::size_t d) {
  CovarianceSpec c;
  c.d = d;
  c.eigenvalues.assign(d > 0 ? d - 1 : 0, DyadicScalar(1));
  c.description = "unit spectrum";
  return c;
}

inline void validate_covariance(const CovarianceSpec& cov) {
  if (cov.d == 0) throw std::invalid_argument("covariance dimension must be positive");
  if (cov.eigenvalues.size() + 1 != cov.d)
    throw std::invalid_argument("covariance needs d-1 eigenvalues");
  mpz_class dc;
  mpz_ui_pow_ui(dc.get_mpz_t(), static_cast<unsigned long>(cov.d),
                static_cast<unsigned long>(cov.separability_exponent));
  mpq_class hi(dc), lo(1, dc);
  for (const auto& e : cov.eigenvalues) {
    mpq_class v = e.to_rational();
    if (v <= 0) throw std::invalid_argument("eigenvalues must be positive");
    if (v < lo || v > hi)
      throw std::invalid_argument("eigenvalue outside the separability band");
  }
}

struct ModelSpec {
  ModelVariant variant = ModelVariant::GaussianClustering;
  std::size_t d = 0;
  std::size_t n = 0;
  DyadicScalar a = DyadicScalar(1);
  LabelSource labels = LabelSource::Rademacher;
  IntVec explicit_labels;
  mpq_class label_gamma = 1;  // discrete Gaussian width for General labels
  mpq_class rho = 1;          // PlantedSparseVector density
  mpq_class gamma = 1;        // HCLWE width
  CovarianceSpec covariance;
  bool identity_rotation = false;
  std::int64_t adversarial_round_bits = 0;  // 0 disables post-rotation rounding
};

// Advisory range check on the spacing; out-of-band values are legal but
// flagged so sweeps do not silently leave the regime the guarantees cover.
inline std::vector<std::string> spec_warnings(const ModelSpec& spec) {
  std::vector<std::string> w;
  if (spec.d == 0) return w;
  mpz_class dc;
  mpz_ui_pow_ui(dc.get_mpz_t(), static_cast<unsigned long>(spec.d), 2);
  mpq_class a = spec.a.to_rational();
  if (a < mpq_class(1, dc) || a > mpq_class(dc))
    w.push_back("spacing a outside [d^-2, d^2]");
  return w;
}

struct ModelInstance {
  Matrix observations;  // n x d, row i is sample z_i
  IntVec ground_truth_labels;
  std::vector<DyadicScalar> ground_truth_direction;  // first rotation column
  Matrix rotation;
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  // Planted-sparse extra view: the same draws presented as the subspace
  // matrix whose rows carry an extra 1/sqrt(n) scale.
  Matrix subspace_matrix;
  DyadicScalar subspace_row_scale = DyadicScalar(1);
};

inline std::vector<std::vector<DyadicScalar>> observation_rows(
    const ModelInstance& inst) {
  std::vector<std::vector<DyadicScalar>> rows(inst.observations.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].resize(inst.observations.cols());
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      rows[i][j] = inst.observations(i, j);
  }
  return rows;
}

namespace detail {

inline void check_labels(const IntVec& labels, std::size_t d) {
  mpz_class cap = mpz_class(1) << d;
  bool all_zero = true;
  for (const auto& x : labels) {
    if (mpz_cmpabs(x.get_mpz_t(), cap.get_mpz_t()) > 0)
      throw std::invalid_argument("label magnitude exceeds 2^d");
    if (x != 0) all_zero = false;
  }
  if (all_zero) throw std::invalid_argument("labels are all zero");
}

// Canonical-frame assembly shared by every sampler: rows (a x_i, Lambda w_i)
// pushed through the exact dyadic near-rotation. Linear dependencies among
// the rows are exactly those of the canonical frame, which is what makes the
// kernel relation over the labels hold exactly downstream.
inline ModelInstance assemble_instance(const ModelSpec& spec, IntVec labels,
                                       RngStream& rng) {
  const std::size_t d = spec.d;
  const std::size_t n = spec.n;
  validate_covariance(spec.covariance);
  if (spec.covariance.d != d) throw std::invalid_argument("covariance dimension mismatch");
  if (labels.size() != n) throw std::invalid_argument("label count mismatch");
  check_labels(labels, d);
  if (spec.a.to_rational() <= 0) throw std::invalid_argument("spacing must be positive");

  Matrix canonical(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    canonical(i, 0) = spec.a * DyadicScalar(labels[i]);
    for (std::size_t j = 1; j < d; ++j)
      canonical(i, j) = spec.covariance.eigenvalues[j - 1] * rng.normal_dyadic();
  }
  Matrix q = spec.identity_rotation ? Matrix::identity(d)
                                    : haar_like_rotation(d, rng);

  ModelInstance inst;
  inst.spec = spec;
  inst.seed = rng.seed();
  inst.stream = rng.stream_id();
  inst.rotation = q;
  inst.ground_truth_labels = std::move(labels);
  inst.ground_truth_direction.resize(d);
  for (std::size_t i = 0; i < d; ++i) inst.ground_truth_direction[i] = q(i, 0);
  inst.observations = canonical * q.transpose();  // row i becomes (Q zhat_i)^T
  if (spec.adversarial_round_bits > 0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        inst.observations(i, j) =
            inst.observations(i, j).truncate_bits(spec.adversarial_round_bits);
  return inst;
}

constexpr int kResampleCap = 64;

}  // namespace detail

inline ModelInstance sample_general(const ModelSpec& spec, RngStream& rng) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("empty model");
  IntVec labels(spec.n);
  switch (spec.labels) {
    case LabelSource::Explicit:
      labels = spec.explicit_labels;
      break;
    case LabelSource::Rademacher: {
      for (int attempt = 0;; ++attempt) {
        bool nonzero = false;
        for (auto& x : labels) {
          x = bernoulli_rademacher(mpq_class(1), rng);
          if (x != 0) nonzero = true;
        }
        if (nonzero) break;
        if (attempt >= detail::kResampleCap)
          throw std::runtime_error("label resampling cap reached");
      }
      break;
    }
    case LabelSource::DiscreteGaussianLabels: {
      DiscreteGaussianSampler dg{spec.label_gamma};
      for (int attempt = 0;; ++attempt) {
        bool nonzero = false;
        for (auto& x : labels) {
          x = dg.sample(rng);
          if (x != 0) nonzero = true;
        }
        if (nonzero) break;
        if (attempt >= detail::kResampleCap)
          throw std::runtime_error("label resampling cap reached");
      }
      break;
    }
  }
  return detail::assemble_instance(spec, std::move(labels), rng);
}

inline ModelInstance sample_clustering(const ModelSpec& spec, RngStream& rng) {
  ModelSpec s = spec;
  s.variant = ModelVariant::GaussianClustering;
  s.labels = LabelSource::Rademacher;
  return sample_general(s, rng);
}

inline ModelInstance sample_hclwe(const ModelSpec& spec, RngStream& rng) {
  if (spec.gamma < 1) throw std::invalid_argument("gamma must be at least 1");
  // Spacing 1/gamma must be dyadic for the exact construction, so the
  // numerator of gamma has to be a power of two.
  const mpz_class& p = spec.gamma.get_num();
  const mpz_class& qden = spec.gamma.get_den();
  mp_bitcnt_t low = mpz_scan1(p.get_mpz_t(), 0);
  if ((p >> low) != 1)
    throw std::invalid_argument("gamma numerator must be a power of two");
  DyadicScalar a(qden, -static_cast<std::int64_t>(low));

  ModelSpec s = spec;
  s.a = a;
  s.covariance = unit_covariance(spec.d);

  // Accept a label vector only when every entry obeys
  // |k/gamma| <= max(sqrt(d), gamma), checked exactly as
  // k^2 q^4 <= max(d p^2 q^2, p^4).
  mpz_class b1 = mpz_class(static_cast<unsigned long>(spec.d)) * p * p * qden * qden;
  mpz_class b2 = p * p * p * p;
  mpz_class bound = b1 > b2 ? b1 : b2;
  DiscreteGaussianSampler dg{spec.gamma};
  IntVec labels(spec.n);
  for (int attempt = 0;; ++attempt) {
    bool ok = false;
    bool within = true;
    for (auto& x : labels) {
      long k = dg.sample(rng);
      x = k;
      if (k != 0) ok = true;
      mpz_class k2 = mpz_class(k) * k * qden * qden * qden * qden;
      if (k2 > bound) within = false;
    }
    if (ok && within) break;
    if (attempt >= detail::kResampleCap)
      throw std::runtime_error("label resampling cap reached");
  }
  return detail::assemble_instance(s, std::move(labels), rng);
}

inline ModelInstance sample_planted_sparse(const ModelSpec& spec, RngStream& rng) {
  if (spec.rho <= 0 || spec.rho > 1)
    throw std::invalid_argument("rho must lie in (0, 1]");
  ModelSpec s = spec;
  s.a = detail::inv_sqrt(spec.rho, 53);  // exact whenever 1/sqrt(rho) is dyadic
  s.covariance = unit_covariance(spec.d);

  IntVec symbols(spec.n);
  for (int attempt = 0;; ++attempt) {
    bool nonzero = false;
    for (auto& x : symbols) {
      x = bernoulli_rademacher(spec.rho, rng);
      if (x != 0) nonzero = true;
    }
    if (nonzero) break;
    if (attempt >= detail::kResampleCap)
      throw std::runtime_error("planted vector all zero after resampling cap");
  }
  ModelInstance inst = detail::assemble_instance(s, std::move(symbols), rng);
  // Subspace view: identical draws, rows carrying the 1/sqrt(n) scale that
  // the recovery path removes.
  DyadicScalar r = detail::inv_sqrt(mpq_class(static_cast<unsigned long>(spec.n)), 53);
  inst.subspace_row_scale = r;
  inst.subspace_matrix = Matrix(spec.n, spec.d);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t j = 0; j < spec.d; ++j)
      inst.subspace_matrix(i, j) = r * inst.observations(i, j);
  return inst;
}

}  // namespace latrec
