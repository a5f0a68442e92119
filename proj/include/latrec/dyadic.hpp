#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace latrec {

// Exact base-2 scalar m * 2^e. Canonical form: m odd or zero; zero keeps e = 0.
// Closed under +, -, *; division is deliberately absent (use RationalScalar).
class DyadicScalar {
 public:
  DyadicScalar() : m_(0), e_(0) {}
  DyadicScalar(long v) : m_(v), e_(0) { canonicalize(); }
  explicit DyadicScalar(const mpz_class& v) : m_(v), e_(0) { canonicalize(); }
  DyadicScalar(const mpz_class& mantissa, std::int64_t exponent)
      : m_(mantissa), e_(exponent) {
    canonicalize();
  }

  // Every finite double is exactly representable; NaN/inf are rejected.
  static DyadicScalar from_double(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite double");
    if (x == 0.0) return DyadicScalar();
    int exp2 = 0;
    double frac = std::frexp(x, &exp2);           // x = frac * 2^exp2, |frac| in [0.5,1)
    double scaled = std::ldexp(frac, 53);         // integer-valued, |scaled| < 2^53
    mpz_class m(scaled);
    return DyadicScalar(m, static_cast<std::int64_t>(exp2) - 53);
  }

  const mpz_class& mantissa() const { return m_; }
  std::int64_t exponent() const { return e_; }
  bool is_zero() const { return m_ == 0; }
  int sign() const { return sgn(m_); }

  DyadicScalar operator-() const {
    DyadicScalar r;
    r.m_ = -m_;
    r.e_ = e_;
    return r;
  }

  friend DyadicScalar operator+(const DyadicScalar& a, const DyadicScalar& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    std::int64_t e = std::min(a.e_, b.e_);
    mpz_class m = shifted(a, e) + shifted(b, e);
    return DyadicScalar(m, e);
  }
  friend DyadicScalar operator-(const DyadicScalar& a, const DyadicScalar& b) {
    return a + (-b);
  }
  friend DyadicScalar operator*(const DyadicScalar& a, const DyadicScalar& b) {
    if (a.is_zero() || b.is_zero()) return DyadicScalar();
    DyadicScalar r;
    r.m_ = a.m_ * b.m_;                           // odd * odd stays odd
    r.e_ = a.e_ + b.e_;
    return r;
  }
  DyadicScalar& operator+=(const DyadicScalar& b) { return *this = *this + b; }
  DyadicScalar& operator-=(const DyadicScalar& b) { return *this = *this - b; }
  DyadicScalar& operator*=(const DyadicScalar& b) { return *this = *this * b; }

  friend bool operator==(const DyadicScalar& a, const DyadicScalar& b) {
    return a.m_ == b.m_ && (a.is_zero() || a.e_ == b.e_);
  }
  friend bool operator!=(const DyadicScalar& a, const DyadicScalar& b) {
    return !(a == b);
  }
  friend bool operator<(const DyadicScalar& a, const DyadicScalar& b) {
    return (a - b).sign() < 0;
  }
  friend bool operator<=(const DyadicScalar& a, const DyadicScalar& b) {
    return (a - b).sign() <= 0;
  }
  friend bool operator>(const DyadicScalar& a, const DyadicScalar& b) { return b < a; }
  friend bool operator>=(const DyadicScalar& a, const DyadicScalar& b) { return b <= a; }

  DyadicScalar abs() const { return sign() < 0 ? -*this : *this; }

  // Floor toward -infinity at N fractional bits: (x)_N = 2^-N * floor(2^N * x).
  DyadicScalar truncate_bits(std::int64_t n_bits) const {
    if (is_zero()) return DyadicScalar();
    std::int64_t shift = e_ + n_bits;
    if (shift >= 0) return *this;                 // already an integer multiple of 2^-N
    mpz_class q;
    mpz_fdiv_q_2exp(q.get_mpz_t(), m_.get_mpz_t(), static_cast<mp_bitcnt_t>(-shift));
    return DyadicScalar(q, -n_bits);
  }

  // Exact value as a rational (denominator is a power of two).
  mpq_class to_rational() const {
    mpq_class q(m_);
    if (e_ >= 0) {
      mpz_class p;
      mpz_mul_2exp(p.get_mpz_t(), m_.get_mpz_t(), static_cast<mp_bitcnt_t>(e_));
      q = p;
    } else {
      mpz_class den;
      mpz_setbit(den.get_mpz_t(), static_cast<mp_bitcnt_t>(-e_));
      q = mpq_class(m_, den);
      q.canonicalize();
    }
    return q;
  }

  // Nearest double; may round, diagnostics only.
  double to_double() const {
    if (is_zero()) return 0.0;
    long bits = static_cast<long>(mpz_sizeinbase(m_.get_mpz_t(), 2));
    if (bits <= 900 && e_ > -900 && e_ < 900) {
      return mpz_get_d(m_.get_mpz_t()) * std::ldexp(1.0, static_cast<int>(e_));
    }
    return to_rational().get_d();
  }

  std::string to_string() const {
    return m_.get_str() + "*2^" + std::to_string(e_);
  }

 private:
  void canonicalize() {
    if (m_ == 0) {
      e_ = 0;
      return;
    }
    mp_bitcnt_t tz = mpz_scan1(m_.get_mpz_t(), 0);
    if (tz > 0) {
      mpz_fdiv_q_2exp(m_.get_mpz_t(), m_.get_mpz_t(), tz);
      e_ += static_cast<std::int64_t>(tz);
    }
  }

  static mpz_class shifted(const DyadicScalar& a, std::int64_t e) {
    mpz_class r;
    mpz_mul_2exp(r.get_mpz_t(), a.m_.get_mpz_t(),
                 static_cast<mp_bitcnt_t>(a.e_ - e));
    return r;
  }

  mpz_class m_;
  std::int64_t e_;
};

inline DyadicScalar truncate_bits(const DyadicScalar& x, std::int64_t n_bits) {
  return x.truncate_bits(n_bits);
}

// Exact rational truncation to N fractional bits, returned as a dyadic.
inline DyadicScalar truncate_bits(const mpq_class& x, std::int64_t n_bits) {
  mpz_class num;
  mpz_mul_2exp(num.get_mpz_t(), x.get_num().get_mpz_t(),
               static_cast<mp_bitcnt_t>(n_bits));
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), x.get_den().get_mpz_t());
  return DyadicScalar(q, -n_bits);
}

// Reduced fraction with positive denominator, backed by GMP rationals.
using RationalScalar = mpq_class;

inline DyadicScalar pow2(std::int64_t e) { return DyadicScalar(1, e); }

}  // namespace latrec
