#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "latrec/dyadic.hpp"

namespace latrec {

// Finalizer from the splitmix64 generator. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Combine two words into a stream id: mix each half, xor, mix again.
// Used everywhere a child stream is spawned, so the derivation is one
// documented rule instead of ad hoc hashing at call sites.
inline std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ mix64(b ^ 0xA3EC647659359ACDULL));
}

// Counter-based splitmix64 stream. A (seed, stream_id) pair fully determines
// the draw sequence; no global state, safe to hand one stream per task.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed),
        stream_id_(stream_id),
        state_(mix64(seed ^ mix64(stream_id ^ 0x1F83D9ABFB41BD6BULL))),
        have_spare_(false),
        spare_(0.0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RngStream child(std::uint64_t index) const {
    return RngStream(seed_, derive_stream_id(stream_id_, index));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  // Uniform on [0,1) with 53 random mantissa bits.
  double uniform53() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log argument.
  double uniform53_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second member of each pair is spared.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform53_pos();
    double u2 = uniform53();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // The normal draw as an exact dyadic (every double is one).
  DyadicScalar normal_dyadic() { return DyadicScalar::from_double(normal()); }

  // Uniform integer in [0, n), n > 0, by rejection on whole words.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below(0)");
    std::uint64_t limit = n * ((~0ULL) / n);  // largest multiple of n <= 2^64
    for (;;) {
      std::uint64_t r = next_u64();
      if (limit == 0 || r < limit) return r % n;
    }
  }

  // Uniform mpz in [0, n), n > 0, rejection sampling on fixed-width blocks.
  mpz_class uniform_mpz_below(const mpz_class& n) {
    if (n <= 0) throw std::invalid_argument("uniform_mpz_below: n <= 0");
    std::size_t bits = mpz_sizeinbase(n.get_mpz_t(), 2);
    std::size_t words = (bits + 63) / 64;
    for (;;) {
      mpz_class r = 0;
      for (std::size_t w = 0; w < words; ++w) {
        mpz_mul_2exp(r.get_mpz_t(), r.get_mpz_t(), 64);
        r += static_cast<unsigned long>(next_u64());
      }
      mpz_fdiv_q_2exp(r.get_mpz_t(), r.get_mpz_t(),
                      static_cast<mp_bitcnt_t>(words * 64 - bits));
      if (r < n) return r;
    }
  }

  // Uniform integer label in [-2^d, 2^d].
  mpz_class uniform_label(unsigned d) {
    mpz_class span = 1;
    mpz_mul_2exp(span.get_mpz_t(), span.get_mpz_t(), d + 1);
    span += 1;  // 2^(d+1) + 1 values
    mpz_class r = uniform_mpz_below(span);
    mpz_class half = 1;
    mpz_mul_2exp(half.get_mpz_t(), half.get_mpz_t(), d);
    return r - half;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  bool have_spare_;
  double spare_;
};

// Ternary symbol: +1 and -1 with probability rho/2 each, 0 otherwise.
// The threshold comparison is exact in integers, so rho is honored exactly.
inline int bernoulli_rademacher(const mpq_class& rho, RngStream& rng) {
  if (rho <= 0 || rho > 1) throw std::invalid_argument("rho out of (0,1]");
  mpz_class u_den =
      mpz_class(static_cast<unsigned long>(rng.next_u64())) * rho.get_den();
  // u/2^64 < rho/2  <=>  2 * u * den < num * 2^64
  mpz_class num_scaled = rho.get_num();
  mpz_mul_2exp(num_scaled.get_mpz_t(), num_scaled.get_mpz_t(), 64);
  if (2 * u_den < num_scaled) return 1;
  if (u_den < num_scaled) return -1;
  return 0;
}

// Discrete Gaussian on (1/gamma)Z restricted to |k/gamma| <= T with
// T = max(sqrt(64 ln 2 + 2 ln 4), gamma). Weights exp(-(k/gamma)^2 / 2),
// drawn by inverse CDF over the precomputed table.
class DiscreteGaussianSampler {
 public:
  explicit DiscreteGaussianSampler(const mpq_class& gamma) : gamma_(gamma) {
    if (gamma < 1) throw std::invalid_argument("gamma must be >= 1");
    double g = gamma.get_d();
    double t_mass = std::sqrt(64.0 * std::log(2.0) + 2.0 * std::log(4.0));
    tail_cut_ = std::max(t_mass, g);
    kmax_ = static_cast<long>(std::floor(g * tail_cut_));
    cdf_.resize(2 * kmax_ + 1);
    double acc = 0.0;
    for (long k = -kmax_; k <= kmax_; ++k) {
      double x = static_cast<double>(k) / g;
      acc += std::exp(-0.5 * x * x);
      cdf_[static_cast<std::size_t>(k + kmax_)] = acc;
    }
    total_ = acc;
  }

  // Label k; the sampled point is k/gamma.
  long sample(RngStream& rng) const {
    double u = rng.uniform53() * total_;
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<long>(it - cdf_.begin()) - kmax_;
  }

  long kmax() const { return kmax_; }
  double tail_cut() const { return tail_cut_; }
  double pmf(long k) const {
    if (k < -kmax_ || k > kmax_) return 0.0;
    double x = static_cast<double>(k) / gamma_.get_d();
    return std::exp(-0.5 * x * x) / total_;
  }

 private:
  mpq_class gamma_;
  double tail_cut_;
  long kmax_;
  double total_;
  std::vector<double> cdf_;
};

}  // namespace latrec
