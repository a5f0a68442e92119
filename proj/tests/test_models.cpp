#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "latrec/models.hpp"

using latrec::DyadicScalar;
using latrec::Matrix;
using latrec::ModelInstance;
using latrec::ModelSpec;
using latrec::ModelVariant;
using latrec::RngStream;

namespace {

ModelSpec clustering_spec(std::size_t d, std::size_t n) {
  ModelSpec s;
  s.variant = ModelVariant::GaussianClustering;
  s.d = d;
  s.n = n;
  s.covariance = latrec::unit_covariance(d);
  return s;
}

// The defining identity of every sampler: the exact kernel coefficients of
// the observation columns annihilate the scaled labels. Computed here from
// scratch via the exact solver.
mpq_class kernel_label_residual(const ModelInstance& inst) {
  const std::size_t d = inst.spec.d;
  REQUIRE(inst.spec.n == d + 1);
  Matrix z(d, d);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = 0; r < d; ++r) z(r, c) = inst.observations(c + 1, r);
  latrec::RatVec rhs(d);
  for (std::size_t r = 0; r < d; ++r) rhs[r] = -inst.observations(0, r).to_rational();
  auto lam = latrec::exact_solve(z, rhs);
  REQUIRE(lam.has_value());
  mpq_class acc = mpq_class(inst.ground_truth_labels[0]);
  for (std::size_t i = 0; i < d; ++i)
    acc += (*lam)[i] * inst.ground_truth_labels[i + 1];
  return acc * inst.spec.a.to_rational();
}

// Operator norm of a small symmetric matrix as sqrt of the top eigenvalue
// of E^T E, by plain power iteration.
double op_norm(const std::vector<std::vector<double>>& e) {
  const std::size_t m = e.size();
  std::vector<std::vector<double>> g(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k) g[i][j] += e[k][i] * e[k][j];
  std::vector<double> v(m, 1.0);
  double lam = 0.0;
  for (int it = 0; it < 300; ++it) {
    std::vector<double> w(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) w[i] += g[i][j] * v[j];
    double nrm = 0.0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nrm;
    lam = nrm;
  }
  return std::sqrt(lam);
}

}  // namespace

TEST_CASE("kernel coefficients annihilate the labels in every model") {
  RngStream rng(101, 0);
  for (int rep = 0; rep < 5; ++rep) {
    auto r1 = rng.child(4 * rep);
    ModelInstance c = latrec::sample_clustering(clustering_spec(6, 7), r1);
    REQUIRE(kernel_label_residual(c) == 0);

    ModelSpec g = clustering_spec(5, 6);
    g.variant = ModelVariant::General;
    g.labels = latrec::LabelSource::DiscreteGaussianLabels;
    g.label_gamma = 2;
    g.a = DyadicScalar(mpz_class(3), -1);  // spacing 3/2
    auto r2 = rng.child(4 * rep + 1);
    REQUIRE(kernel_label_residual(latrec::sample_general(g, r2)) == 0);

    ModelSpec h = clustering_spec(6, 7);
    h.variant = ModelVariant::HCLWE;
    h.gamma = 2;
    auto r3 = rng.child(4 * rep + 2);
    REQUIRE(kernel_label_residual(latrec::sample_hclwe(h, r3)) == 0);

    ModelSpec p = clustering_spec(6, 7);
    p.variant = ModelVariant::PlantedSparseVector;
    p.rho = mpq_class(1, 4);
    auto r4 = rng.child(4 * rep + 3);
    REQUIRE(kernel_label_residual(latrec::sample_planted_sparse(p, r4)) == 0);
  }
}

TEST_CASE("kernel identity holds with a spread spectrum") {
  ModelSpec s = clustering_spec(8, 9);
  // log-spaced eigenvalues across [1/4, 4]
  s.covariance.eigenvalues = {
      DyadicScalar(mpz_class(1), -2), DyadicScalar(mpz_class(1), -1),
      DyadicScalar(1),               DyadicScalar(mpz_class(3), -1),
      DyadicScalar(2),               DyadicScalar(3),
      DyadicScalar(4)};
  s.covariance.description = "spread spectrum";
  RngStream rng(103, 0);
  for (int rep = 0; rep < 5; ++rep) {
    auto r = rng.child(rep);
    REQUIRE(kernel_label_residual(latrec::sample_clustering(s, r)) == 0);
  }
}

TEST_CASE("identity rotation with constant labels pins the first column") {
  ModelSpec s = clustering_spec(4, 5);
  s.variant = ModelVariant::General;
  s.labels = latrec::LabelSource::Explicit;
  s.explicit_labels = {1, 1, 1, 1, 1};
  s.identity_rotation = true;
  RngStream rng(105, 0);
  ModelInstance inst = latrec::sample_general(s, rng);
  for (std::size_t i = 0; i < 5; ++i)
    REQUIRE(inst.observations(i, 0) == DyadicScalar(1));
  for (std::size_t i = 0; i < 4; ++i)
    REQUIRE(inst.ground_truth_direction[i] ==
            (i == 0 ? DyadicScalar(1) : DyadicScalar()));
}

TEST_CASE("clustering labels are signs") {
  RngStream rng(107, 0);
  for (int rep = 0; rep < 10; ++rep) {
    auto r = rng.child(rep);
    ModelInstance inst = latrec::sample_clustering(clustering_spec(5, 6), r);
    for (const auto& x : inst.ground_truth_labels)
      REQUIRE((x == 1 || x == -1));
  }
}

TEST_CASE("hclwe labels respect the width bound and spacing is recorded") {
  ModelSpec h = clustering_spec(10, 11);
  h.variant = ModelVariant::HCLWE;
  h.gamma = 2;
  RngStream rng(109, 0);
  for (int rep = 0; rep < 10; ++rep) {
    auto r = rng.child(rep);
    ModelInstance inst = latrec::sample_hclwe(h, r);
    REQUIRE(inst.spec.a == DyadicScalar(mpz_class(1), -1));
    // |k|/gamma <= max(sqrt(d), gamma), i.e. k^2 <= d gamma^2 here
    for (const auto& k : inst.ground_truth_labels) REQUIRE(k * k <= 40);
  }
  h.gamma = 1;
  auto r = rng.child(99);
  REQUIRE(latrec::sample_hclwe(h, r).spec.a == DyadicScalar(1));
}

TEST_CASE("planted sparse spacing and subspace view") {
  ModelSpec p = clustering_spec(3, 4);
  p.variant = ModelVariant::PlantedSparseVector;
  p.rho = mpq_class(1, 4);
  RngStream rng(111, 0);
  ModelInstance inst = latrec::sample_planted_sparse(p, rng);
  REQUIRE(inst.spec.a == DyadicScalar(2));
  // n = 4, so the row scale 1/sqrt(n) = 1/2 is exact
  REQUIRE(inst.subspace_row_scale == DyadicScalar(mpz_class(1), -1));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      REQUIRE(inst.subspace_matrix(i, j) ==
              inst.subspace_row_scale * inst.observations(i, j));

  ModelSpec q = clustering_spec(8, 9);
  q.variant = ModelVariant::PlantedSparseVector;
  q.rho = 1;
  auto r = rng.child(1);
  ModelInstance full = latrec::sample_planted_sparse(q, r);
  REQUIRE(full.spec.a == DyadicScalar(1));
  for (const auto& x : full.ground_truth_labels)
    REQUIRE((x == 1 || x == -1));  // rho = 1 never zeroes a symbol
}

TEST_CASE("sparse symbol frequency matches the density") {
  RngStream rng(113, 0);
  const int n = 100000;
  int nonzero = 0;
  for (int i = 0; i < n; ++i)
    if (latrec::bernoulli_rademacher(mpq_class(1, 2), rng) != 0) ++nonzero;
  REQUIRE(std::abs(nonzero / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("orthogonal component covariance matches the spectrum") {
  const std::size_t d = 6, n = 7;
  const int instances = 10000;
  std::vector<std::vector<double>> cov(d - 1, std::vector<double>(d - 1, 0.0));
  RngStream rng(115, 0);
  long count = 0;
  for (int t = 0; t < instances; ++t) {
    auto r = rng.child(static_cast<std::uint64_t>(t));
    ModelInstance inst = latrec::sample_clustering(clustering_spec(d, n), r);
    for (std::size_t i = 0; i < n; ++i) {
      // canonical-frame coordinates via the stored rotation
      std::vector<double> zhat(d - 1, 0.0);
      for (std::size_t c = 1; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t rr = 0; rr < d; ++rr)
          acc += inst.rotation(rr, c).to_double() *
                 inst.observations(i, rr).to_double();
        zhat[c - 1] = acc;
      }
      for (std::size_t a = 0; a + 1 < d; ++a)
        for (std::size_t b = 0; b + 1 < d; ++b) cov[a][b] += zhat[a] * zhat[b];
      ++count;
    }
  }
  std::vector<std::vector<double>> err = cov;
  for (std::size_t a = 0; a + 1 < d; ++a)
    for (std::size_t b = 0; b + 1 < d; ++b) {
      err[a][b] /= static_cast<double>(count);
      if (a == b) err[a][b] -= 1.0;  // unit spectrum, so Lambda^2 = I
    }
  REQUIRE(op_norm(err) < 0.05);
}

TEST_CASE("sampling is deterministic in spec and seed") {
  ModelSpec s = clustering_spec(6, 7);
  RngStream r1(117, 5), r2(117, 5);
  ModelInstance a = latrec::sample_clustering(s, r1);
  ModelInstance b = latrec::sample_clustering(s, r2);
  REQUIRE(a.ground_truth_labels == b.ground_truth_labels);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.d; ++j)
      REQUIRE(a.observations(i, j) == b.observations(i, j));
  for (std::size_t i = 0; i < s.d; ++i)
    for (std::size_t j = 0; j < s.d; ++j)
      REQUIRE(a.rotation(i, j) == b.rotation(i, j));
  REQUIRE(a.seed == 117);
  REQUIRE(a.stream == 5);
}

TEST_CASE("adversarial rounding truncates every observation entry") {
  ModelSpec s = clustering_spec(5, 6);
  s.adversarial_round_bits = 16;
  RngStream rng(119, 0);
  ModelInstance inst = latrec::sample_clustering(s, rng);
  RngStream rng2(119, 0);
  ModelSpec s0 = s;
  s0.adversarial_round_bits = 0;
  ModelInstance clean = latrec::sample_clustering(s0, rng2);
  bool changed = false;
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.d; ++j) {
      mpq_class scaled = inst.observations(i, j).to_rational() << 16;
      REQUIRE(scaled.get_den() == 1);  // at most 16 fractional bits remain
      REQUIRE(inst.observations(i, j) == clean.observations(i, j).truncate_bits(16));
      if (!(inst.observations(i, j) == clean.observations(i, j))) changed = true;
    }
  REQUIRE(changed);
}

TEST_CASE("invalid model parameters are rejected") {
  ModelSpec s = clustering_spec(4, 5);
  s.variant = ModelVariant::General;
  s.labels = latrec::LabelSource::Explicit;
  s.explicit_labels = {0, 0, 0, 0, 0};
  RngStream rng(121, 0);
  REQUIRE_THROWS_AS(latrec::sample_general(s, rng), std::invalid_argument);
  s.explicit_labels = {mpz_class(1) << 5, 0, 0, 0, 1};  // above 2^d = 16
  REQUIRE_THROWS_AS(latrec::sample_general(s, rng), std::invalid_argument);

  ModelSpec h = clustering_spec(4, 5);
  h.variant = ModelVariant::HCLWE;
  h.gamma = mpq_class(3, 2);  // numerator not a power of two
  REQUIRE_THROWS_AS(latrec::sample_hclwe(h, rng), std::invalid_argument);
  h.gamma = mpq_class(1, 2);  // below 1
  REQUIRE_THROWS_AS(latrec::sample_hclwe(h, rng), std::invalid_argument);

  ModelSpec p = clustering_spec(4, 5);
  p.variant = ModelVariant::PlantedSparseVector;
  p.rho = 0;
  REQUIRE_THROWS_AS(latrec::sample_planted_sparse(p, rng), std::invalid_argument);
  p.rho = 2;
  REQUIRE_THROWS_AS(latrec::sample_planted_sparse(p, rng), std::invalid_argument);

  ModelSpec c = clustering_spec(6, 7);
  c.covariance.eigenvalues[2] = DyadicScalar(64);  // outside [1/36, 36]
  REQUIRE_THROWS_AS(latrec::sample_clustering(c, rng), std::invalid_argument);

  ModelSpec w = clustering_spec(4, 5);
  w.a = DyadicScalar(32);  // above d^2, advisory only
  REQUIRE(latrec::spec_warnings(w).size() == 1);
  REQUIRE(latrec::spec_warnings(clustering_spec(4, 5)).empty());
}
