#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "latrec/dyadic.hpp"
#include "latrec/rng.hpp"

namespace latrec {

// Dense row-major matrix of exact dyadic entries.
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = DyadicScalar(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  DyadicScalar& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const DyadicScalar& operator()(std::size_t i, std::size_t j) const {
    return a_[i * cols_ + j];
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend Matrix operator*(const Matrix& x, const Matrix& y) {
    if (x.cols_ != y.rows_) throw std::invalid_argument("matrix shape mismatch");
    Matrix r(x.rows_, y.cols_);
    for (std::size_t i = 0; i < x.rows_; ++i)
      for (std::size_t k = 0; k < x.cols_; ++k) {
        if (x(i, k).is_zero()) continue;
        for (std::size_t j = 0; j < y.cols_; ++j)
          r(i, j) += x(i, k) * y(k, j);
      }
    return r;
  }

  std::vector<DyadicScalar> apply(const std::vector<DyadicScalar>& v) const {
    if (v.size() != cols_) throw std::invalid_argument("vector length mismatch");
    std::vector<DyadicScalar> r(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r[i] += (*this)(i, j) * v[j];
    return r;
  }

  DyadicScalar max_abs_entry() const {
    DyadicScalar m;
    for (const auto& x : a_) {
      DyadicScalar ax = x.abs();
      if (m < ax) m = ax;
    }
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<DyadicScalar> a_;
};

using IntVec = std::vector<mpz_class>;
using IntMat = std::vector<IntVec>;
using RatVec = std::vector<mpq_class>;

// Fraction-free Gaussian elimination (Bareiss). Returns det of a square
// integer matrix; consumes its argument. Row swaps tracked by sign.
inline mpz_class bareiss_det(IntMat a) {
  const std::size_t n = a.size();
  if (n == 0) return 1;
  int sign = 1;
  mpz_class prev = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    std::size_t p = k;
    while (p < n && a[p][k] == 0) ++p;
    if (p == n) return 0;
    if (p != k) {
      std::swap(a[p], a[k]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) {
        a[i][j] = a[i][j] * a[k][k] - a[i][k] * a[k][j];
        mpz_divexact(a[i][j].get_mpz_t(), a[i][j].get_mpz_t(), prev.get_mpz_t());
      }
      a[i][k] = 0;
    }
    prev = a[k][k];
  }
  return sign > 0 ? a[n - 1][n - 1] : mpz_class(-a[n - 1][n - 1]);
}

namespace detail {

// Rewrite each row of [A | b] over a common power of two so entries become
// integers. Row scaling by positive factors preserves solutions and kernels
// and the sign of every determinant that uses whole rows.
inline void integer_rows(const Matrix& m, IntMat& out) {
  out.assign(m.rows(), IntVec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::int64_t min_e = 0;
    bool seen = false;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const DyadicScalar& x = m(i, j);
      if (x.is_zero()) continue;
      if (!seen || x.exponent() < min_e) min_e = x.exponent();
      seen = true;
    }
    if (!seen) continue;
    if (min_e > 0) min_e = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const DyadicScalar& x = m(i, j);
      if (x.is_zero()) continue;
      mpz_mul_2exp(out[i][j].get_mpz_t(), x.mantissa().get_mpz_t(),
                   static_cast<mp_bitcnt_t>(x.exponent() - min_e));
    }
  }
}

}  // namespace detail

// Exact determinant of a square dyadic matrix.
inline mpq_class exact_det(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("det of non-square matrix");
  const std::size_t n = m.rows();
  // Scale row i by 2^{-e_i}; det = int_det * 2^{sum e_i}.
  IntMat a(n, IntVec(n));
  std::int64_t e_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t min_e = 0;
    bool seen = false;
    for (std::size_t j = 0; j < n; ++j) {
      const DyadicScalar& x = m(i, j);
      if (x.is_zero()) continue;
      if (!seen || x.exponent() < min_e) min_e = x.exponent();
      seen = true;
    }
    if (!seen) return mpq_class(0);
    e_total += min_e;
    for (std::size_t j = 0; j < n; ++j) {
      const DyadicScalar& x = m(i, j);
      if (x.is_zero()) continue;
      mpz_mul_2exp(a[i][j].get_mpz_t(), x.mantissa().get_mpz_t(),
                   static_cast<mp_bitcnt_t>(x.exponent() - min_e));
    }
  }
  mpz_class d = bareiss_det(std::move(a));
  return DyadicScalar(d, e_total).to_rational();
}

// Exact solve of a square integer system; nullopt when the matrix is singular.
inline std::optional<RatVec> solve_int(IntMat a, IntVec b) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) a[i].push_back(b[i]);
  mpz_class prev = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    while (p < n && a[p][k] == 0) ++p;
    if (p == n) return std::nullopt;
    if (p != k) std::swap(a[p], a[k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j <= n; ++j) {
        a[i][j] = a[i][j] * a[k][k] - a[i][k] * a[k][j];
        mpz_divexact(a[i][j].get_mpz_t(), a[i][j].get_mpz_t(), prev.get_mpz_t());
      }
      a[i][k] = 0;
    }
    prev = a[k][k];
  }
  RatVec x(n);
  for (std::size_t k = n; k-- > 0;) {
    mpq_class acc(a[k][n]);
    for (std::size_t j = k + 1; j < n; ++j) acc -= mpq_class(a[k][j]) * x[j];
    if (a[k][k] == 0) return std::nullopt;
    x[k] = acc / mpq_class(a[k][k]);
    x[k].canonicalize();
  }
  return x;
}

// Exact solve A x = b for square dyadic A; nullopt when singular.
inline std::optional<RatVec> exact_solve(const Matrix& a,
                                         const std::vector<DyadicScalar>& b) {
  if (a.rows() != a.cols() || b.size() != a.rows())
    throw std::invalid_argument("exact_solve shape mismatch");
  const std::size_t n = a.rows();
  IntMat ai(n, IntVec(n));
  IntVec bi(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t min_e = 0;
    bool seen = false;
    for (std::size_t j = 0; j < n; ++j)
      if (!a(i, j).is_zero()) {
        if (!seen || a(i, j).exponent() < min_e) min_e = a(i, j).exponent();
        seen = true;
      }
    if (!b[i].is_zero() && (!seen || b[i].exponent() < min_e)) {
      min_e = seen ? std::min(min_e, b[i].exponent()) : b[i].exponent();
      seen = true;
    }
    if (!seen) continue;
    if (min_e > 0) min_e = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (!a(i, j).is_zero())
        mpz_mul_2exp(ai[i][j].get_mpz_t(), a(i, j).mantissa().get_mpz_t(),
                     static_cast<mp_bitcnt_t>(a(i, j).exponent() - min_e));
    if (!b[i].is_zero())
      mpz_mul_2exp(bi[i].get_mpz_t(), b[i].mantissa().get_mpz_t(),
                   static_cast<mp_bitcnt_t>(b[i].exponent() - min_e));
  }
  return solve_int(std::move(ai), std::move(bi));
}

// Exact solve with a rational right-hand side. The rhs is cleared to integers
// by the lcm L of its denominators; the integer solution is then y = L x.
inline std::optional<RatVec> exact_solve(const Matrix& a, const RatVec& b) {
  if (a.rows() != a.cols() || b.size() != a.rows())
    throw std::invalid_argument("exact_solve shape mismatch");
  const std::size_t n = a.rows();
  mpz_class lcm = 1;
  for (const auto& q : b)
    mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), q.get_den().get_mpz_t());
  IntMat ai(n, IntVec(n));
  IntVec bi(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t min_e = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (!a(i, j).is_zero()) min_e = std::min(min_e, a(i, j).exponent());
    for (std::size_t j = 0; j < n; ++j)
      if (!a(i, j).is_zero())
        mpz_mul_2exp(ai[i][j].get_mpz_t(), a(i, j).mantissa().get_mpz_t(),
                     static_cast<mp_bitcnt_t>(a(i, j).exponent() - min_e));
    mpq_class s = b[i] * mpq_class(lcm);
    s.canonicalize();
    bi[i] = s.get_num();
    mpz_mul_2exp(bi[i].get_mpz_t(), bi[i].get_mpz_t(),
                 static_cast<mp_bitcnt_t>(-min_e));
  }
  auto sol = solve_int(std::move(ai), std::move(bi));
  if (!sol) return std::nullopt;
  for (auto& q : *sol) {
    q /= mpq_class(lcm);
    q.canonicalize();
  }
  return sol;
}

// One-dimensional kernel of a full-row-rank m x (m+1) dyadic matrix, found
// through signed maximal minors. Returns nullopt when the rank drops. The
// result is scaled so its last nonzero coordinate equals one.
inline std::optional<RatVec> kernel_line(const Matrix& a) {
  if (a.cols() != a.rows() + 1)
    throw std::invalid_argument("kernel_line expects m x (m+1)");
  const std::size_t m = a.rows();
  IntMat rowsi;
  detail::integer_rows(a, rowsi);
  RatVec y(m + 1);
  bool nonzero = false;
  for (std::size_t drop = 0; drop <= m; ++drop) {
    IntMat sub(m, IntVec(m));
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t c = 0;
      for (std::size_t j = 0; j <= m; ++j) {
        if (j == drop) continue;
        sub[i][c++] = rowsi[i][j];
      }
    }
    mpz_class det = bareiss_det(std::move(sub));
    if (drop % 2 == 1) det = -det;
    if (det != 0) nonzero = true;
    y[drop] = mpq_class(det);
  }
  if (!nonzero) return std::nullopt;
  std::size_t last = m + 1;
  for (std::size_t j = m + 1; j-- > 0;)
    if (y[j] != 0) {
      last = j;
      break;
    }
  mpq_class scale = y[last];
  for (auto& q : y) {
    q /= scale;
    q.canonicalize();
  }
  return y;
}

namespace detail {

// Dyadic approximation of 1/sqrt(s) for rational s > 0, absolute error
// below about 2^-(bits-2).
inline DyadicScalar inv_sqrt(const mpq_class& s, std::int64_t bits) {
  if (s <= 0) throw std::invalid_argument("inv_sqrt of non-positive");
  // 1/sqrt(s) = sqrt(den/num); compute floor(sqrt(den * 4^bits / num)) * 2^-bits.
  mpz_class scaled;
  mpz_mul_2exp(scaled.get_mpz_t(), s.get_den().get_mpz_t(),
               static_cast<mp_bitcnt_t>(2 * bits));
  scaled /= s.get_num();
  mpz_class root;
  mpz_sqrt(root.get_mpz_t(), scaled.get_mpz_t());
  return DyadicScalar(root, -bits);
}

// floor-style dyadic sqrt(s) with `bits` fractional bits, error below 2^-bits.
inline DyadicScalar dyadic_sqrt(const mpq_class& s, std::int64_t bits) {
  if (s < 0) throw std::invalid_argument("dyadic_sqrt of negative");
  mpz_class scaled;
  mpz_mul_2exp(scaled.get_mpz_t(), s.get_num().get_mpz_t(),
               static_cast<mp_bitcnt_t>(2 * bits));
  scaled /= s.get_den();
  mpz_class root;
  mpz_sqrt(root.get_mpz_t(), scaled.get_mpz_t());
  return DyadicScalar(root, -bits);
}

}  // namespace detail

// Near-rotation: orthonormalize a 53-bit Gaussian matrix by Gram-Schmidt in
// exact rational arithmetic, rounding each normalized column to 104 fractional
// bits. The orthogonality defect max |Q^T Q - I| is verified exactly against
// 2^-40 and the determinant against zero; fresh draws otherwise.
inline Matrix haar_like_rotation(std::size_t d, RngStream& rng) {
  if (d == 0) throw std::invalid_argument("haar_like_rotation: d = 0");
  const std::int64_t kRoundBits = 104;
  const std::int64_t kSqrtBits = 160;
  const DyadicScalar defect_bound = pow2(-40);
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<std::vector<mpq_class>> g(d, std::vector<mpq_class>(d));
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i)
        g[j][i] = rng.normal_dyadic().to_rational();  // g[j] is column j
    Matrix q(d, d);
    std::vector<std::vector<mpq_class>> qc(d, std::vector<mpq_class>(d));
    bool degenerate = false;
    for (std::size_t j = 0; j < d && !degenerate; ++j) {
      std::vector<mpq_class> v = g[j];
      for (std::size_t p = 0; p < j; ++p) {
        mpq_class dot(0);
        for (std::size_t i = 0; i < d; ++i) dot += g[j][i] * qc[p][i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * qc[p][i];
      }
      mpq_class norm_sq(0);
      for (std::size_t i = 0; i < d; ++i) norm_sq += v[i] * v[i];
      if (norm_sq == 0) {
        degenerate = true;
        break;
      }
      DyadicScalar r = detail::inv_sqrt(norm_sq, kSqrtBits);
      for (std::size_t i = 0; i < d; ++i) {
        DyadicScalar e = truncate_bits(v[i] * r.to_rational(), kRoundBits);
        q(i, j) = e;
        qc[j][i] = e.to_rational();
      }
    }
    if (degenerate) continue;
    Matrix gram = q.transpose() * q;
    DyadicScalar defect;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        DyadicScalar e = gram(i, j) - (i == j ? DyadicScalar(1) : DyadicScalar(0));
        e = e.abs();
        if (defect < e) defect = e;
      }
    if (defect_bound < defect) continue;
    if (exact_det(q) == 0) continue;
    return q;
  }
  throw std::runtime_error("haar_like_rotation failed to converge");
}

}  // namespace latrec
