#pragma once

#include <gmpxx.h>

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "latrec/dyadic.hpp"
#include "latrec/linalg.hpp"

namespace latrec {

// Ordered list of linearly independent integer vectors generating a lattice.
struct LatticeBasis {
  std::size_t dim = 0;
  IntMat vectors;
};

inline mpz_class norm_sq(const IntVec& v) {
  mpz_class s = 0;
  for (const auto& x : v) s += x * x;
  return s;
}

struct ReductionStats {
  std::uint64_t swaps = 0;
  std::uint64_t size_reductions = 0;
  std::size_t max_bits = 0;
  double wall_ms = 0.0;
};

struct ReductionResult {
  LatticeBasis reduced;
  // Column j holds the coefficients of reduced vector j over the input
  // vectors, so stacking input vectors as matrix columns V gives V_red = V U.
  IntMat transform;
  ReductionStats stats;
};

// Exact independence check through the integer Gram-Schmidt determinants.
inline bool is_linearly_independent(const LatticeBasis& basis) {
  const std::size_t n = basis.vectors.size();
  if (n == 0) return true;
  IntMat gram(n, IntVec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      mpz_class s = 0;
      for (std::size_t c = 0; c < basis.dim; ++c)
        s += basis.vectors[i][c] * basis.vectors[j][c];
      gram[i][j] = s;
      gram[j][i] = s;
    }
  return bareiss_det(std::move(gram)) != 0;
}

// LLL reduction in all-integer arithmetic. State follows the classic
// integral Gram-Schmidt representation: D[i+1] is the Gram determinant of
// the first i+1 vectors and lam[i][j] = mu_{i,j} * D[j+1], both integers,
// so every update below is an exact integer division.
inline ReductionResult lll_reduce(const LatticeBasis& basis,
                                  const mpq_class& delta) {
  if (delta <= mpq_class(1, 4) || delta >= 1)
    throw std::invalid_argument("delta must lie in (1/4, 1)");
  const std::size_t n = basis.vectors.size();
  const std::size_t dim = basis.dim;
  for (const auto& v : basis.vectors)
    if (v.size() != dim) throw std::invalid_argument("ragged basis");
  ReductionResult result;
  result.reduced.dim = dim;
  if (n == 0) return result;

  auto t0 = std::chrono::steady_clock::now();
  const mpz_class dp = delta.get_num();
  const mpz_class dq = delta.get_den();

  IntMat b = basis.vectors;
  IntMat trans(n, IntVec(n, 0));
  for (std::size_t i = 0; i < n; ++i) trans[i][i] = 1;
  std::vector<mpz_class> D(n + 1);
  IntMat lam(n, IntVec(n, 0));
  D[0] = 1;

  ReductionStats stats;
  auto note_bits = [&stats](const mpz_class& x) {
    if (x == 0) return;
    std::size_t bits = mpz_sizeinbase(x.get_mpz_t(), 2);
    if (bits > stats.max_bits) stats.max_bits = bits;
  };

  auto inner = [&](std::size_t i, std::size_t j) {
    mpz_class s = 0;
    for (std::size_t c = 0; c < dim; ++c)
      mpz_addmul(s.get_mpz_t(), b[i][c].get_mpz_t(), b[j][c].get_mpz_t());
    return s;
  };

  // Size-reduce b[k] against b[j]; |mu_{k,j}| <= 1/2 afterwards.
  auto reduce_pair = [&](std::size_t k, std::size_t j) {
    mpz_class two_lam = 2 * lam[k][j];
    if (mpz_cmpabs(two_lam.get_mpz_t(), D[j + 1].get_mpz_t()) <= 0) return;
    // Nearest integer to lam/D with D > 0; ties round up.
    mpz_class q;
    mpz_class num = two_lam + D[j + 1];
    mpz_class den = 2 * D[j + 1];
    mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
    for (std::size_t c = 0; c < dim; ++c)
      mpz_submul(b[k][c].get_mpz_t(), q.get_mpz_t(), b[j][c].get_mpz_t());
    for (std::size_t c = 0; c < n; ++c)
      mpz_submul(trans[k][c].get_mpz_t(), q.get_mpz_t(), trans[j][c].get_mpz_t());
    for (std::size_t i = 0; i < j; ++i) {
      mpz_submul(lam[k][i].get_mpz_t(), q.get_mpz_t(), lam[j][i].get_mpz_t());
      note_bits(lam[k][i]);
    }
    lam[k][j] -= q * D[j + 1];
    note_bits(lam[k][j]);
    ++stats.size_reductions;
  };

  std::size_t k = 1;
  std::size_t kmax = 0;
  D[1] = inner(0, 0);
  if (n > 0 && D[1] == 0) throw std::invalid_argument("dependent or zero basis");
  while (k < n) {
    if (k > kmax) {
      kmax = k;
      for (std::size_t j = 0; j <= k; ++j) {
        mpz_class u = inner(k, j);
        for (std::size_t i = 0; i < j; ++i) {
          u = D[i + 1] * u - lam[k][i] * lam[j][i];
          mpz_divexact(u.get_mpz_t(), u.get_mpz_t(), D[i].get_mpz_t());
        }
        if (j < k) {
          lam[k][j] = u;
          note_bits(u);
        } else {
          if (u == 0) throw std::invalid_argument("dependent basis");
          D[k + 1] = u;
          note_bits(u);
        }
      }
    }
    for (;;) {
      reduce_pair(k, k - 1);
      // Lovasz test for the pair (k-1, k):
      //   B_k + mu^2 B_{k-1} < delta B_{k-1}
      // in integer form dq*(D[k-1]*D[k+1] + lam^2) < dp*D[k]^2.
      mpz_class lhs = dq * (D[k - 1] * D[k + 1] + lam[k][k - 1] * lam[k][k - 1]);
      mpz_class rhs = dp * D[k] * D[k];
      if (lhs < rhs) {
        // Swap b[k-1] and b[k], updating the integral GSO in place.
        std::swap(b[k - 1], b[k]);
        std::swap(trans[k - 1], trans[k]);
        for (std::size_t j = 0; j + 1 < k; ++j) std::swap(lam[k - 1][j], lam[k][j]);
        mpz_class lam_kk = lam[k][k - 1];
        mpz_class Bnew = D[k - 1] * D[k + 1] + lam_kk * lam_kk;
        mpz_divexact(Bnew.get_mpz_t(), Bnew.get_mpz_t(), D[k].get_mpz_t());
        for (std::size_t i = k + 1; i <= kmax; ++i) {
          mpz_class t = lam[i][k];
          lam[i][k] = D[k + 1] * lam[i][k - 1] - lam_kk * t;
          mpz_divexact(lam[i][k].get_mpz_t(), lam[i][k].get_mpz_t(),
                       D[k].get_mpz_t());
          lam[i][k - 1] = Bnew * t + lam_kk * lam[i][k];
          mpz_divexact(lam[i][k - 1].get_mpz_t(), lam[i][k - 1].get_mpz_t(),
                       D[k + 1].get_mpz_t());
          note_bits(lam[i][k]);
          note_bits(lam[i][k - 1]);
        }
        D[k] = Bnew;
        note_bits(Bnew);
        ++stats.swaps;
        if (k > 1) --k;
      } else {
        for (std::size_t j = k - 1; j-- > 0;) reduce_pair(k, j);
        ++k;
        break;
      }
    }
  }

  for (const auto& row : b)
    for (const auto& x : row) note_bits(x);
  stats.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  result.reduced.vectors = std::move(b);
  result.transform.assign(n, IntVec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) result.transform[i][j] = trans[j][i];
  result.stats = stats;
  return result;
}

namespace detail {

// Rational Gram-Schmidt data of an integer basis: mu coefficients and
// squared orthogonal norms. Independent of the integral LLL state above.
struct RationalGso {
  std::vector<RatVec> mu;
  RatVec b_star_sq;
};

inline RationalGso rational_gso(const IntMat& vectors) {
  const std::size_t n = vectors.size();
  RationalGso g;
  g.mu.assign(n, RatVec(n, mpq_class(0)));
  g.b_star_sq.assign(n, mpq_class(0));
  std::vector<RatVec> star(n);
  for (std::size_t i = 0; i < n; ++i) {
    RatVec v(vectors[i].size());
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = mpq_class(vectors[i][c]);
    for (std::size_t j = 0; j < i; ++j) {
      if (g.b_star_sq[j] == 0) continue;
      mpq_class dot(0);
      for (std::size_t c = 0; c < v.size(); ++c)
        dot += mpq_class(vectors[i][c]) * star[j][c];
      g.mu[i][j] = dot / g.b_star_sq[j];
      g.mu[i][j].canonicalize();
      for (std::size_t c = 0; c < v.size(); ++c) v[c] -= g.mu[i][j] * star[j][c];
    }
    mpq_class nsq(0);
    for (const auto& x : v) nsq += x * x;
    g.b_star_sq[i] = nsq;
    star[i] = std::move(v);
  }
  return g;
}

}  // namespace detail

// Ceiling of the square root of a nonnegative rational.
inline mpz_class ceil_sqrt(const mpq_class& x) {
  if (x < 0) throw std::invalid_argument("ceil_sqrt of negative");
  mpz_class q;
  mpz_cdiv_q(q.get_mpz_t(), x.get_num().get_mpz_t(), x.get_den().get_mpz_t());
  mpz_class r;
  mpz_sqrt(r.get_mpz_t(), q.get_mpz_t());
  if (r * r < q) r += 1;
  return r;
}

// Default enumeration box: ceil(2^{(n-1)/2} * |shortest input| / min ||b*||).
inline mpz_class default_coeff_bound(const LatticeBasis& basis) {
  const std::size_t n = basis.vectors.size();
  if (n == 0) return 1;
  mpz_class min_norm = norm_sq(basis.vectors[0]);
  for (const auto& v : basis.vectors) {
    mpz_class s = norm_sq(v);
    if (s < min_norm) min_norm = s;
  }
  auto gso = detail::rational_gso(basis.vectors);
  mpq_class min_star = gso.b_star_sq[0];
  for (const auto& s : gso.b_star_sq)
    if (s < min_star) min_star = s;
  if (min_star <= 0) throw std::invalid_argument("dependent basis");
  mpq_class ratio = mpq_class(min_norm) / min_star;
  ratio.canonicalize();
  mpz_class two_pow = 1;
  mpz_mul_2exp(two_pow.get_mpz_t(), two_pow.get_mpz_t(),
               static_cast<mp_bitcnt_t>(n - 1));
  return ceil_sqrt(ratio * mpq_class(two_pow));
}

// Exhaustive shortest vector within the coefficient box |c_i| <= coeff_bound,
// pruned by exact partial norms in the Gram-Schmidt frame. Serves as the
// independent oracle for the LLL guarantee; never calls lll_reduce.
inline IntVec shortest_vector_bruteforce(const LatticeBasis& basis,
                                         const mpz_class& coeff_bound) {
  const std::size_t n = basis.vectors.size();
  if (n == 0 || n > 8) throw std::invalid_argument("dimension guard: need 1..8 vectors");
  if (coeff_bound < 1) throw std::invalid_argument("coeff_bound must be >= 1");
  auto gso = detail::rational_gso(basis.vectors);
  for (const auto& s : gso.b_star_sq)
    if (s <= 0) throw std::invalid_argument("dependent basis");
  long bound = coeff_bound.fits_slong_p() ? coeff_bound.get_si() : 0;
  if (bound == 0) throw std::invalid_argument("coeff_bound too large to enumerate");

  std::size_t seed = 0;
  mpz_class seed_norm = norm_sq(basis.vectors[0]);
  for (std::size_t i = 1; i < n; ++i) {
    mpz_class s = norm_sq(basis.vectors[i]);
    if (s < seed_norm) {
      seed_norm = s;
      seed = i;
    }
  }
  mpq_class best_sq(seed_norm);
  IntVec best_coeff(n, 0);
  best_coeff[seed] = 1;
  std::vector<long> coeff(n, 0);

  // Depth-first from the last coordinate. At each level the projected center
  // is -sum_{i>level} c_i mu_{i,level}; candidates are scanned zigzag outward
  // from it, and a direction is abandoned once its term alone kills the
  // budget, since the term grows monotonically away from the center.
  auto descend = [&](auto&& self, std::size_t level, const mpq_class& acc) -> void {
    mpq_class cen(0);
    for (std::size_t i = level + 1; i < n; ++i)
      if (coeff[i] != 0) cen += mpq_class(coeff[i]) * gso.mu[i][level];
    // Exact nearest integer to -cen keeps both scan directions monotone.
    mpq_class half_shift = mpq_class(1, 2) - cen;
    mpz_class start_z;
    mpz_fdiv_q(start_z.get_mpz_t(), half_shift.get_num().get_mpz_t(),
               half_shift.get_den().get_mpz_t());
    long start = start_z.fits_slong_p() ? start_z.get_si()
                                        : (start_z > 0 ? bound : -bound);
    if (start > bound) start = bound;
    if (start < -bound) start = -bound;
    auto visit = [&](long c) -> bool {  // false: prune this direction
      mpq_class term = mpq_class(c) + cen;
      term = term * term * gso.b_star_sq[level];
      mpq_class total = acc + term;
      if (total > best_sq) return false;
      coeff[level] = c;
      if (level == 0) {
        bool all_zero = true;
        for (std::size_t i = 0; i < n; ++i)
          if (coeff[i] != 0) {
            all_zero = false;
            break;
          }
        if (!all_zero && total < best_sq) {
          best_sq = total;
          for (std::size_t i = 0; i < n; ++i) best_coeff[i] = coeff[i];
        }
      } else {
        self(self, level - 1, total);
      }
      return true;
    };
    bool up_alive = true, down_alive = true;
    long up = start, down = start - 1;
    while (up_alive || down_alive) {
      if (up_alive) {
        if (up > bound || !visit(up))
          up_alive = false;
        else
          ++up;
      }
      if (down_alive) {
        if (down < -bound || !visit(down))
          down_alive = false;
        else
          --down;
      }
    }
    coeff[level] = 0;
  };
  descend(descend, n - 1, mpq_class(0));

  IntVec out(basis.dim, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < basis.dim; ++c)
      out[c] += best_coeff[i] * basis.vectors[i][c];
  return out;
}

// The relation lattice of the recovery pipeline: columns encode candidate
// integer combinations of the truncated lambdas plus a 2^-N slack column.
struct RelationBasis {
  LatticeBasis basis;  // vectors[j] is column j of the matrix B
  std::int64_t N = 0;
  mpz_class M;
  RatVec lambdas;
};

inline mpz_class floor_scaled(const mpq_class& x, std::int64_t n_bits) {
  mpz_class num = x.get_num();
  mpz_mul_2exp(num.get_mpz_t(), num.get_mpz_t(), static_cast<mp_bitcnt_t>(n_bits));
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), x.get_den().get_mpz_t());
  return q;  // floor(2^N x), so (x)_N = q * 2^-N
}

inline RelationBasis build_relation_basis(const RatVec& lambdas, std::int64_t N,
                                          const mpz_class& M) {
  if (lambdas.empty() || lambdas[0] != 1)
    throw std::invalid_argument("lambdas[0] must equal 1");
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (M < 2) throw std::invalid_argument("M must be >= 2");
  const std::size_t k = lambdas.size();
  RelationBasis rb;
  rb.N = N;
  rb.M = M;
  rb.lambdas = lambdas;
  rb.basis.dim = k + 1;
  rb.basis.vectors.assign(k + 1, IntVec(k + 1, 0));
  // Column j < k: top entry M * floor(2^N lambda_{j+1}); e_j below for j >= 1.
  for (std::size_t j = 0; j < k; ++j) {
    rb.basis.vectors[j][0] = M * floor_scaled(lambdas[j], N);
    if (j >= 1) rb.basis.vectors[j][j] = 1;
  }
  rb.basis.vectors[k][0] = M;  // M * 2^N * 2^-N
  rb.basis.vectors[k][k] = 1;
  return rb;
}

// Search for a short exact relation among the N-bit truncations of the given
// values (values[0] = 1): a nonzero m with
//   sum_i m_i (values_i)_N + m_{k+1} 2^-N = 0.
inline std::optional<IntVec> find_integer_relation(
    const std::vector<DyadicScalar>& values, std::int64_t N, const mpz_class& M,
    const mpz_class& norm_bound, const mpq_class& delta = mpq_class(99, 100)) {
  if (values.empty() || !(values[0] == DyadicScalar(1)))
    throw std::invalid_argument("values[0] must equal 1");
  RatVec lambdas(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) lambdas[i] = values[i].to_rational();
  RelationBasis rb = build_relation_basis(lambdas, N, M);
  ReductionResult red = lll_reduce(rb.basis, delta);
  const std::size_t k = values.size();
  mpz_class bound_sq = norm_bound * norm_bound;
  std::optional<std::size_t> found;
  mpz_class found_sq;
  for (std::size_t j = 0; j < red.reduced.vectors.size(); ++j) {
    const IntVec& v = red.reduced.vectors[j];
    if (v[0] != 0) continue;  // top coordinate nonzero: not a relation
    mpz_class nsq = norm_sq(v);
    if (nsq == 0 || nsq > bound_sq) continue;
    if (!found || nsq < found_sq) {
      found = j;
      found_sq = nsq;
    }
  }
  if (!found) return std::nullopt;
  IntVec m(k + 1);
  for (std::size_t i = 0; i < k + 1; ++i) m[i] = red.transform[i][*found];
  // The defining residual, checked exactly before returning.
  mpz_class residual = 0;  // scaled by 2^N
  for (std::size_t i = 0; i < k; ++i)
    residual += m[i] * floor_scaled(lambdas[i], N);
  residual += m[k];
  if (residual != 0)
    throw std::logic_error("relation candidate fails exact verification");
  return m;
}

}  // namespace latrec
