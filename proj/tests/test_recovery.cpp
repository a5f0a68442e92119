#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latrec/models.hpp"
#include "latrec/recovery.hpp"

using latrec::DyadicScalar;
using latrec::IntVec;
using latrec::Matrix;
using latrec::ModelInstance;
using latrec::ModelSpec;
using latrec::ModelVariant;
using latrec::RecoveryOutput;
using latrec::RecoveryStatus;
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

// Exact kernel coefficients (1, -Z^{-1} z_1) of an n = d+1 sample list.
latrec::RatVec kernel_coefficients(const std::vector<std::vector<DyadicScalar>>& samples) {
  const std::size_t d = samples[0].size();
  Matrix z(d, d);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = 0; r < d; ++r) z(r, c) = samples[c + 1][r];
  latrec::RatVec rhs(d);
  for (std::size_t r = 0; r < d; ++r) rhs[r] = -samples[0][r].to_rational();
  auto tail = latrec::exact_solve(z, rhs);
  REQUIRE(tail.has_value());
  latrec::RatVec lam(d + 1);
  lam[0] = 1;
  for (std::size_t i = 0; i < d; ++i) lam[i + 1] = (*tail)[i];
  return lam;
}

mpq_class dot_direction(const std::vector<DyadicScalar>& z,
                        const std::vector<DyadicScalar>& u) {
  DyadicScalar acc;
  for (std::size_t j = 0; j < z.size(); ++j) acc = acc + z[j] * u[j];
  return acc.to_rational();
}

}  // namespace

TEST_CASE("clustering instance at d = 8 is recovered and verified") {
  ModelSpec s = clustering_spec(8, 9);
  RngStream rng(2024, 0);
  ModelInstance inst = latrec::sample_clustering(s, rng);
  auto samples = latrec::observation_rows(inst);
  RecoveryOutput out = latrec::recover(samples, inst.spec.a, 1024);
  REQUIRE(out.status == RecoveryStatus::Success);
  REQUIRE(latrec::verify_up_to_sign(out, inst));

  // direction matches +-u well inside the coarse verification tolerance
  DyadicScalar err_plus, err_minus;
  for (std::size_t j = 0; j < 8; ++j) {
    DyadicScalar dp = out.direction[j] - inst.ground_truth_direction[j];
    DyadicScalar dm = out.direction[j] + inst.ground_truth_direction[j];
    err_plus = err_plus + dp * dp;
    err_minus = err_minus + dm * dm;
  }
  bool tight = err_plus <= latrec::pow2(-60) || err_minus <= latrec::pow2(-60);
  REQUIRE(tight);
}

TEST_CASE("soundness of every reported success") {
  RngStream rng(2025, 0);
  for (int rep = 0; rep < 3; ++rep) {
    auto r = rng.child(rep);
    ModelInstance inst = latrec::sample_clustering(clustering_spec(6, 7), r);
    auto samples = latrec::observation_rows(inst);
    RecoveryOutput out = latrec::recover(samples, inst.spec.a, 1024);
    REQUIRE(out.status == RecoveryStatus::Success);
    mpq_class a = inst.spec.a.to_rational();
    mpq_class tol20(mpz_class(1), mpz_class(1) << 20);
    mpq_class tol30(mpz_class(1), mpz_class(1) << 30);
    for (std::size_t i = 0; i < 7; ++i) {
      mpq_class resid = dot_direction(samples[i], out.direction) - a * out.labels[i];
      if (resid < 0) resid = -resid;
      REQUIRE(resid <= (i == 0 ? tol20 : tol30));
    }
  }
}

TEST_CASE("duplicated sample column fails as singular") {
  RngStream rng(2026, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(5, 6), rng);
  auto samples = latrec::observation_rows(inst);
  samples[2] = samples[1];
  RecoveryOutput out = latrec::recover(samples, inst.spec.a, 512);
  REQUIRE(out.status == RecoveryStatus::FailSingular);
  REQUIRE(out.labels.empty());
}

TEST_CASE("hclwe labels are the drawn integers up to a sign") {
  ModelSpec h = clustering_spec(10, 11);
  h.variant = ModelVariant::HCLWE;
  h.gamma = 2;
  RngStream rng(2027, 0);
  ModelInstance inst = latrec::sample_hclwe(h, rng);
  REQUIRE(inst.spec.a == DyadicScalar(mpz_class(1), -1));
  RecoveryOutput out =
      latrec::recover(latrec::observation_rows(inst), inst.spec.a,
                      latrec::heuristic_precision_bits(10));
  REQUIRE(out.status == RecoveryStatus::Success);
  REQUIRE(latrec::verify_up_to_sign(out, inst));
}

TEST_CASE("planted sparse instance is recovered") {
  ModelSpec p = clustering_spec(8, 9);
  p.variant = ModelVariant::PlantedSparseVector;
  p.rho = mpq_class(1, 4);
  RngStream rng(2028, 0);
  ModelInstance inst = latrec::sample_planted_sparse(p, rng);
  RecoveryOutput out =
      latrec::recover(latrec::observation_rows(inst), inst.spec.a, 1024);
  REQUIRE(out.status == RecoveryStatus::Success);
  REQUIRE(latrec::verify_up_to_sign(out, inst));
}

TEST_CASE("negated hidden frame verifies against the same output") {
  RngStream rng(2029, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(6, 7), rng);
  RecoveryOutput out =
      latrec::recover(latrec::observation_rows(inst), inst.spec.a, 1024);
  REQUIRE(out.status == RecoveryStatus::Success);
  ModelInstance flipped = inst;
  for (auto& x : flipped.ground_truth_labels) x = -x;
  for (auto& v : flipped.ground_truth_direction) v = -v;
  REQUIRE(latrec::verify_up_to_sign(out, inst));
  REQUIRE(latrec::verify_up_to_sign(out, flipped));
}

TEST_CASE("verification rejects a single flipped label") {
  RngStream rng(2030, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(6, 7), rng);
  RecoveryOutput out =
      latrec::recover(latrec::observation_rows(inst), inst.spec.a, 1024);
  REQUIRE(out.status == RecoveryStatus::Success);
  REQUIRE(latrec::verify_up_to_sign(out, inst));
  ModelInstance broken = inst;
  broken.ground_truth_labels[3] = -broken.ground_truth_labels[3];
  REQUIRE_FALSE(latrec::verify_up_to_sign(out, broken));
}

TEST_CASE("recovery rejects malformed input") {
  RngStream rng(2031, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(5, 6), rng);
  auto samples = latrec::observation_rows(inst);
  samples.pop_back();
  REQUIRE_THROWS_AS(latrec::recover(samples, inst.spec.a, 512),
                    std::invalid_argument);
  auto bad = latrec::observation_rows(inst);
  REQUIRE_THROWS_AS(latrec::recover(bad, DyadicScalar(0), 512),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(latrec::recover(bad, inst.spec.a, 0), std::invalid_argument);
}

TEST_CASE("determinant statistic fixed cases and kernel identity") {
  RngStream rng(2032, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(5, 6), rng);
  auto samples = latrec::observation_rows(inst);
  Matrix z(5, 5);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t r = 0; r < 5; ++r) z(r, c) = samples[c + 1][r];
  mpq_class detz = latrec::exact_det(z);

  IntVec e1(6, 0);
  e1[0] = 1;
  REQUIRE(latrec::pt_polynomial(samples, e1) == detz);

  // the planted label vector is orthogonal to the kernel coefficients,
  // so the statistic annihilates it exactly
  latrec::RatVec lam = kernel_coefficients(samples);
  mpq_class pair_x(0);
  for (std::size_t i = 0; i < 6; ++i)
    pair_x += lam[i] * inst.ground_truth_labels[i];
  REQUIRE(pair_x == 0);
  REQUIRE(latrec::pt_polynomial(samples, inst.ground_truth_labels) == 0);

  // the statistic is det(Z) times the kernel pairing, for any t
  for (int rep = 0; rep < 10; ++rep) {
    IntVec rt(6);
    for (auto& x : rt)
      x = static_cast<long>(rng.next_u64() % 41) - 20;
    mpq_class pairing(0);
    for (std::size_t i = 0; i < 6; ++i) pairing += lam[i] * rt[i];
    REQUIRE(latrec::pt_polynomial(samples, rt) == detz * pairing);
  }
}

TEST_CASE("determinant statistic moments at d = 3") {
  // canonical frame x = (1,1,-1,1), a = 1, unit spectrum, t = e1
  ModelSpec s = clustering_spec(3, 4);
  s.variant = ModelVariant::General;
  s.labels = latrec::LabelSource::Explicit;
  s.explicit_labels = {1, 1, -1, 1};
  IntVec t(4, 0);
  t[0] = 1;
  RngStream rng(2033, 0);
  const int trials = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < trials; ++i) {
    auto r = rng.child(static_cast<std::uint64_t>(i));
    ModelInstance inst = latrec::sample_general(s, r);
    double p = latrec::pt_polynomial(latrec::observation_rows(inst), t).get_d();
    sum += p;
    sum_sq += p * p;
  }
  double mean = sum / trials;
  double var = sum_sq / trials - mean * mean;
  // target variance 6 = (d-1)! a^{2d} (prod lambda)^2 sum (t_i x_j - t_j x_i)^2
  REQUIRE(std::abs(mean) < 4.0 * std::sqrt(6.0 / trials));
  REQUIRE(std::abs(var - 6.0) < 1.5);
}

TEST_CASE("ambiguity pair on the handcrafted three dimensional system") {
  std::vector<std::vector<DyadicScalar>> samples = {
      {DyadicScalar(1), DyadicScalar(1), DyadicScalar(0)},
      {DyadicScalar(1), DyadicScalar(0), DyadicScalar(1)}};
  IntVec labels = {1, 1};
  auto pair = latrec::ambiguity_pair(samples, labels);
  // direct solution: v0 = (2/3, 1/3, 1/3), kernel (-1, 1, 1), t = 1/3
  mpq_class third(1, 3);
  std::vector<mpq_class> expect_first = {third, 2 * third, 2 * third};
  std::vector<mpq_class> expect_second = {1, 0, 0};
  mpq_class tol(mpz_class(1), mpz_class(1) << 40);
  for (std::size_t j = 0; j < 3; ++j) {
    mpq_class e1 = pair.first[j].to_rational() - expect_first[j];
    mpq_class e2 = pair.second[j].to_rational() - expect_second[j];
    if (e1 < 0) e1 = -e1;
    if (e2 < 0) e2 = -e2;
    REQUIRE(e1 <= tol);
    REQUIRE(e2 <= tol);
  }
}

TEST_CASE("ambiguity pair properties on generated instances") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    RngStream rng(2034, seed);
    ModelInstance inst = latrec::sample_clustering(clustering_spec(6, 5), rng);
    auto samples = latrec::observation_rows(inst);
    auto pair = latrec::ambiguity_pair(samples, inst.ground_truth_labels);

    mpq_class tol25(mpz_class(1), mpz_class(1) << 25);
    mpq_class tol40(mpz_class(1), mpz_class(1) << 40);
    bool distinct = false;
    for (const auto* v : {&pair.first, &pair.second}) {
      mpq_class nrm(0);
      for (const auto& x : *v) nrm += x.to_rational() * x.to_rational();
      mpq_class unit_err = nrm - 1;
      if (unit_err < 0) unit_err = -unit_err;
      REQUIRE(unit_err <= tol40);
      for (std::size_t i = 0; i < 5; ++i) {
        mpq_class resid =
            dot_direction(samples[i], *v) - inst.ground_truth_labels[i];
        if (resid < 0) resid = -resid;
        REQUIRE(resid <= tol25);
      }
    }
    for (std::size_t j = 0; j < 6; ++j)
      if (!(pair.first[j] == pair.second[j])) distinct = true;
    REQUIRE(distinct);

    // one of the two intersections is the planted direction
    mpq_class d1(0), d2(0);
    for (std::size_t j = 0; j < 6; ++j) {
      mpq_class u = inst.ground_truth_direction[j].to_rational();
      d1 += (pair.first[j].to_rational() - u) * (pair.first[j].to_rational() - u);
      d2 += (pair.second[j].to_rational() - u) * (pair.second[j].to_rational() - u);
    }
    mpq_class tol50(mpz_class(1), mpz_class(1) << 50);
    REQUIRE((d1 <= tol50 || d2 <= tol50));
  }
}

TEST_CASE("ambiguity pair rejects rank deficient samples") {
  std::vector<std::vector<DyadicScalar>> samples = {
      {DyadicScalar(1), DyadicScalar(2), DyadicScalar(3)},
      {DyadicScalar(1), DyadicScalar(2), DyadicScalar(3)}};
  REQUIRE_THROWS_AS(latrec::ambiguity_pair(samples, {1, 1}),
                    std::invalid_argument);
}

TEST_CASE("rounding witness fixed cases") {
  using latrec::rounding_lemma_witness;
  IntVec w = rounding_lemma_witness(
      std::vector<DyadicScalar>{DyadicScalar(1), DyadicScalar(-1)}, {1, 1}, 24);
  REQUIRE(w == IntVec({1, 1, 0}));

  latrec::RatVec s = {1, mpq_class(1, 3)};
  IntVec m = {1, -3};
  IntVec w2 = rounding_lemma_witness(s, m, 16);
  REQUIRE(w2[0] == 1);
  REQUIRE(w2[1] == -3);
  REQUIRE(w2[2] == -((mpz_class(1) << 16) % 3));
  // defining property: exact relation against the truncated values
  mpz_class resid = w2[0] * latrec::floor_scaled(s[0], 16) +
                    w2[1] * latrec::floor_scaled(s[1], 16) + w2[2];
  REQUIRE(resid == 0);
}

TEST_CASE("rounding witness on random planted relations") {
  RngStream rng(2035, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = 2 + rep % 6;
    IntVec m(n);
    std::vector<DyadicScalar> s(n);
    DyadicScalar acc;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      m[i] = static_cast<long>(rng.next_u64() % 21) - 10;
      s[i] = rng.normal_dyadic();
      acc = acc + DyadicScalar(m[i]) * s[i];
    }
    m[n - 1] = (rng.next_u64() & 1) ? 1 : -1;
    s[n - 1] = DyadicScalar(-m[n - 1]) * acc;  // plants the exact relation
    IntVec w = latrec::rounding_lemma_witness(s, m, 48);
    mpz_class resid = 0;
    for (std::size_t i = 0; i < n; ++i)
      resid += w[i] * latrec::floor_scaled(s[i].to_rational(), 48);
    resid += w[n];
    REQUIRE(resid == 0);
    mpz_class lhs = 0, rhs = 0;
    for (const auto& v : w) lhs += v * v;
    for (const auto& v : m) rhs += v * v;
    REQUIRE(lhs <= 64 * static_cast<long>(n) * rhs);
  }
  REQUIRE_THROWS_AS(
      latrec::rounding_lemma_witness(
          std::vector<DyadicScalar>{DyadicScalar(1), DyadicScalar(1)}, {1, 1}, 8),
      std::invalid_argument);
}

TEST_CASE("conditional density invariances and planted energy") {
  RngStream rng(2036, 0);
  ModelInstance inst = latrec::sample_clustering(clustering_spec(8, 5), rng);
  const Matrix& z = inst.observations;
  IntVec x = inst.ground_truth_labels;

  auto f = latrec::energy_fraction(z, x);
  REQUIRE(f.has_value());
  REQUIRE(*f > 0);
  REQUIRE(*f < 1);

  double base = latrec::conditional_log_density(z, x);
  IntVec neg = x;
  for (auto& v : neg) v = -v;
  REQUIRE(latrec::conditional_log_density(z, neg) == base);

  // simultaneous permutation of rows and labels
  std::vector<std::size_t> perm = {4, 2, 0, 1, 3};
  Matrix zp(5, 8);
  IntVec xp(5);
  for (std::size_t i = 0; i < 5; ++i) {
    xp[i] = x[perm[i]];
    for (std::size_t j = 0; j < 8; ++j) zp(i, j) = z(perm[i], j);
  }
  REQUIRE(latrec::conditional_log_density(zp, xp) == base);
  auto fp = latrec::energy_fraction(zp, xp);
  REQUIRE(*fp == *f);

  // duplicated rows make the Gram matrix singular
  Matrix zd = z;
  for (std::size_t j = 0; j < 8; ++j) zd(1, j) = zd(0, j);
  REQUIRE(std::isinf(latrec::conditional_log_density(zd, x)));
  REQUIRE_THROWS_AS(latrec::conditional_log_density(z, IntVec{1, 2, 1, 1, 1}),
                    std::invalid_argument);
}

TEST_CASE("precision policies scale as documented") {
  REQUIRE(latrec::heuristic_precision_bits(3) == 256);
  REQUIRE(latrec::heuristic_precision_bits(8) == 1024);
  REQUIRE(latrec::heuristic_precision_bits(20) == 6400);
  std::int64_t cap12 = latrec::theoretical_precision_bits(12);
  REQUIRE(cap12 > 120000);
  REQUIRE(cap12 < 136000);
  REQUIRE(latrec::theoretical_precision_bits(8) >
          latrec::heuristic_precision_bits(8));
}
