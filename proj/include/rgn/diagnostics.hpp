#pragma once

// Measured counterparts of the constants in the local convergence analysis
// of RGN: Lipschitz constant of x ↦ dF_x ∘ P_{T_x}, Taylor and retraction
// remainders, Weyl/Wedin perturbation inequalities, the linear-rate constant,
// and log-log order fits of error traces.
//
// "Ambient" Jacobians here are N x rN matrices [U_1U_1ᵀ ... U_rU_rᵀ], i.e. dΦ
// composed with the tangent projector in the coordinates of R^{rN}. They have
// the same nonzero singular values as the Terracini matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "rgn/cpd_model.hpp"
#include "rgn/error.hpp"
#include "rgn/linalg.hpp"
#include "rgn/random.hpp"
#include "rgn/scalar.hpp"
#include "rgn/segre.hpp"
#include "rgn/solver.hpp"

namespace rgn {

inline constexpr double golden_ratio = std::numbers::phi;  // (1 + √5) / 2

struct BoundEstimates {
  double C_hat = 0;
  std::size_t C_samples = 0;
  double gamma_F_hat = 0;
  double gamma_I_hat = 0;
  double gamma_R_hat = 0;
  double E_hat = std::numeric_limits<double>::quiet_NaN();
  double theoretical_linear_rate = 0;
  double alpha = 0.9;
};

struct InequalityPair {
  double lhs = 0;
  double rhs = 0;
  bool holds(double rel_slack) const { return lhs <= rhs * (1.0 + rel_slack); }
};

// ---------------------------------------------------------------------------
// Ambient Jacobians

template <Real T>
Matrix<T> ambient_jacobian(const TangentBasis<T>& basis) {
  const std::size_t n = basis.blocks.front().rows();
  Matrix<T> j(n, basis.rank() * n);
  for (std::size_t i = 0; i < basis.rank(); ++i) {
    const Matrix<T> p = matmul(basis.blocks[i], transpose(basis.blocks[i]));
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < n; ++r) j(r, i * n + c) = p(r, c);
  }
  return j;
}

// (U B)† = Bᵀ U† with B = blockdiag(U_iᵀ), valid because U has full column
// rank and B has orthonormal rows.
template <Real T>
Matrix<T> ambient_pseudoinverse(const TangentBasis<T>& basis, const SvdFactors<T>& terracini_svd) {
  const Matrix<T> upinv = pseudoinverse(terracini_svd);  // m x N
  const std::size_t n = basis.blocks.front().rows();
  const std::size_t m = basis.block_cols();
  Matrix<T> out(basis.rank() * n, n);
  for (std::size_t i = 0; i < basis.rank(); ++i)
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < n; ++r) {
        T s(0);
        for (std::size_t k = 0; k < m; ++k) s += basis.blocks[i](r, k) * upinv(i * m + k, c);
        out(i * n + r, c) = s;
      }
  return out;
}

namespace detail {

template <Real T>
struct AmbientLinearization {
  TangentBasis<T> basis;
  SvdFactors<T> svd;  // of the Terracini matrix
  Matrix<T> jac;      // ambient
};

template <Real T>
AmbientLinearization<T> ambient_linearize(const ProductPoint<T>& x) {
  AmbientLinearization<T> a;
  a.basis = tangent_basis(x);
  a.svd = compact_svd(jacobian(a.basis));
  a.jac = ambient_jacobian(a.basis);
  return a;
}

template <Real T>
void require_injective(const SvdFactors<T>& s, const char* who) {
  if (!(s.singular_values.back() > injectivity_tolerance(s.singular_values.front())))
    throw IllConditionedJacobian(std::string(who) + ": Jacobian is rank deficient");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Perturbation inequalities

/// Weyl: |ς_min(A) − ς_min(B)| ≤ ‖A − B‖₂, with ς_min the min(n,p)-th value.
template <Real T>
InequalityPair weyl_bound(const Matrix<T>& a, const Matrix<T>& b) {
  const T sa = compact_svd(a).singular_values.back();
  const T sb = compact_svd(b).singular_values.back();
  return {num::to_double(num::abs(sa - sb)), num::to_double(spectral_norm(subtract(a, b)))};
}

/// Wedin for full-column-rank A, B: ‖A† − B†‖ ≤ φ ‖A†‖ ‖B†‖ ‖A − B‖.
template <Real T>
InequalityPair wedin_bound(const Matrix<T>& a, const Matrix<T>& b) {
  const SvdFactors<T> sa = compact_svd(a);
  const SvdFactors<T> sb = compact_svd(b);
  detail::require_injective(sa, "wedin_bound");
  detail::require_injective(sb, "wedin_bound");
  const T lhs = spectral_norm(subtract(pseudoinverse(sa), pseudoinverse(sb)));
  const T rhs = T(golden_ratio) / sa.singular_values.back() / sb.singular_values.back() * spectral_norm(subtract(a, b));
  return {num::to_double(lhs), num::to_double(rhs)};
}

template <Real T>
InequalityPair wedin_gap(const ProductPoint<T>& x, const ProductPoint<T>& x_star) {
  const auto a = detail::ambient_linearize(x);
  const auto b = detail::ambient_linearize(x_star);
  detail::require_injective(a.svd, "wedin_gap");
  detail::require_injective(b.svd, "wedin_gap");
  const Matrix<T> diff_pinv = subtract(ambient_pseudoinverse(a.basis, a.svd), ambient_pseudoinverse(b.basis, b.svd));
  const T lhs = spectral_norm(diff_pinv);
  const T rhs = T(golden_ratio) / a.svd.singular_values.back() / b.svd.singular_values.back() *
                spectral_norm(subtract(a.jac, b.jac));
  return {num::to_double(lhs), num::to_double(rhs)};
}

template <Real T>
InequalityPair weyl_check(const ProductPoint<T>& x, const ProductPoint<T>& x_star) {
  const auto a = detail::ambient_linearize(x);
  const auto b = detail::ambient_linearize(x_star);
  const T lhs = num::abs(a.svd.singular_values.back() - b.svd.singular_values.back());
  const T rhs = spectral_norm(subtract(b.jac, a.jac));
  return {num::to_double(lhs), num::to_double(rhs)};
}

/// E = ‖J₁† − J⋆†‖ / ‖x₁ − x⋆‖ (index-matched distance).
template <Real T>
double heuristic_E(const ProductPoint<T>& x1, const ProductPoint<T>& x_star) {
  const T dist = ambient_distance(x1, x_star);
  if (!(dist > T(0))) throw InvalidInput("heuristic_E: points coincide");
  const auto a = detail::ambient_linearize(x1);
  const auto b = detail::ambient_linearize(x_star);
  detail::require_injective(a.svd, "heuristic_E");
  detail::require_injective(b.svd, "heuristic_E");
  const T num_ = spectral_norm(subtract(ambient_pseudoinverse(a.basis, a.svd), ambient_pseudoinverse(b.basis, b.svd)));
  return num::to_double(num_ / dist);
}

// ---------------------------------------------------------------------------
// Taylor remainders

enum class TaylorMap { phi, identity };

/// Raw remainder of the projected first-order expansion around x, at y.
template <Real T>
T taylor_remainder(TaylorMap map, const ProductPoint<T>& x, const ProductPoint<T>& y) {
  if (x.rank() != y.rank() || !(x.shape() == y.shape())) throw InvalidInput("taylor_remainder: rank or shape mismatch");
  const TangentBasis<T> basis = tangent_basis(x);
  std::vector<Vector<T>> delta;
  for (std::size_t i = 0; i < x.rank(); ++i)
    delta.push_back(subtract(std::span<const T>(y.term(i).ambient()), std::span<const T>(x.term(i).ambient())));
  const TangentVector<T> proj = project_ambient_to_tangent(basis, delta);
  if (map == TaylorMap::identity) {
    Vector<T> w;
    for (std::size_t i = 0; i < x.rank(); ++i)
      for (std::size_t j = 0; j < delta[i].size(); ++j) w.push_back(delta[i][j] - proj.ambient_terms[i][j]);
    return norm2(w);
  }
  // F(y) − F(x) = Σ_i Δ_i, and dF_x P Δ = Σ_i P_i Δ_i.
  Vector<T> v(x.shape().ambient_dim(), T(0));
  for (std::size_t i = 0; i < x.rank(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += delta[i][j] - proj.ambient_terms[i][j];
  return norm2(v);
}

// ---------------------------------------------------------------------------
// Sampling helpers

template <Real T>
TangentVector<T> random_unit_tangent(const TangentBasis<T>& basis, Rng& rng) {
  Vector<T> c = rng.gaussian_vector<T>(basis.rank() * basis.block_cols());
  const T n = norm2(c);
  for (T& x : c) x /= n;
  return make_tangent(basis, std::move(c));
}

/// Sampled sup of ‖J⋆P⋆ − J P‖₂ / ‖x⋆ − x‖ over retracted points at distance
/// `radius` in tangent coordinates. The k-th sample depends only on (seed, k),
/// so more samples never lower the estimate.
template <Real T>
double estimate_lipschitz_C(const ProductPoint<T>& x_star, double radius, std::size_t num_samples, std::uint64_t seed) {
  if (num_samples == 0) throw InvalidInput("estimate_lipschitz_C: need at least one sample");
  if (!(radius > 0)) throw InvalidInput("estimate_lipschitz_C: radius must be positive");
  const TangentBasis<T> basis = tangent_basis(x_star);
  const Matrix<T> j_star = ambient_jacobian(basis);
  Rng rng(seed);
  double best = 0;
  for (std::size_t k = 0; k < num_samples; ++k) {
    const TangentVector<T> eta = scaled(random_unit_tangent(basis, rng), T(radius));
    const ProductPoint<T> x = retract(x_star, eta);
    const T dist = ambient_distance(x_star, x);
    if (!(dist > T(0))) continue;
    const T ratio = spectral_norm(subtract(j_star, ambient_jacobian(tangent_basis(x)))) / dist;
    best = std::max(best, num::to_double(ratio));
  }
  return best;
}

/// Leading constant of the linear-rate bound: φ C κ² ‖F(x⋆)‖ / α.
inline double theoretical_linear_rate(double kappa, double C_hat, double residual_star, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("theoretical_linear_rate: alpha must lie in (0, 1)");
  return golden_ratio * C_hat * kappa * kappa * residual_star / alpha;
}

// Max remainder / t² over random unit tangent directions at the given steps.
struct SecondOrderConstants {
  double gamma_F = 0;
  double gamma_I = 0;
  double gamma_R = 0;
};

template <Real T>
SecondOrderConstants estimate_second_order_constants(const ProductPoint<T>& x, std::size_t directions,
                                                        const std::vector<double>& steps, std::uint64_t seed) {
  const TangentBasis<T> basis = tangent_basis(x);
  Rng rng(seed);
  SecondOrderConstants g;
  for (std::size_t k = 0; k < directions; ++k) {
    const TangentVector<T> eta = random_unit_tangent(basis, rng);
    for (double t : steps) {
      const ProductPoint<T> y = retract(x, scaled(eta, T(t)));
      const double t2 = t * t;
      g.gamma_F = std::max(g.gamma_F, num::to_double(taylor_remainder(TaylorMap::phi, x, y)) / t2);
      g.gamma_I = std::max(g.gamma_I, num::to_double(taylor_remainder(TaylorMap::identity, x, y)) / t2);
      g.gamma_R = std::max(g.gamma_R, num::to_double(retraction_defect(x, eta, T(t))) / t2);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Rate fitting

struct OrderFit {
  double order = 0;
  double constant = 0;
  std::size_t pairs = 0;
};

namespace detail {

// Consecutive pairs (e_k, e_{k+1}) with e_k in [lower, upper], e_k > floor
// and e_{k+1} > floor.
inline std::vector<std::pair<double, double>> fit_pairs(std::span<const double> errors, double floor, double upper,
                                                        double lower) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    const double a = errors[k];
    const double b = errors[k + 1];
    if (std::isfinite(a) && std::isfinite(b) && a > floor && a >= lower && a <= upper && b > floor)
      out.emplace_back(a, b);
  }
  return out;
}

}  // namespace detail

/// Least-squares fit of log e_{k+1} = order · log e_k + log constant.
inline OrderFit estimate_order(std::span<const double> errors, double floor,
                               double upper = std::numeric_limits<double>::infinity(), double lower = 0) {
  const auto pairs = detail::fit_pairs(errors, floor, upper, lower);
  if (pairs.size() < 2) throw InsufficientData("estimate_order: need at least three trace entries above the floor");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [a, b] : pairs) {
    const double x = std::log(a), y = std::log(b);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pairs.size());
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0)) throw InsufficientData("estimate_order: errors do not vary");
  OrderFit fit;
  fit.order = (n * sxy - sx * sy) / den;
  fit.constant = std::exp((sy - fit.order * sx) / n);
  fit.pairs = pairs.size();
  return fit;
}

/// Geometric mean of e_{k+1}/e_k over the same pairs estimate_order uses.
inline double fit_linear_ratio(std::span<const double> errors, double floor,
                               double upper = std::numeric_limits<double>::infinity(), double lower = 0) {
  const auto pairs = detail::fit_pairs(errors, floor, upper, lower);
  if (pairs.empty()) throw InsufficientData("fit_linear_ratio: no consecutive pair above the floor");
  double s = 0;
  for (auto [a, b] : pairs) s += std::log(b / a);
  return std::exp(s / static_cast<double>(pairs.size()));
}

/// Slope of the least-squares line through (log t, log r).
inline double loglog_slope(std::span<const double> t, std::span<const double> r) {
  if (t.size() != r.size() || t.size() < 2) throw InsufficientData("loglog_slope: need two or more matched samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0) || !(r[k] > 0)) throw InsufficientData("loglog_slope: samples must be positive");
    const double x = std::log(t[k]), y = std::log(r[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(t.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// 100 · eps · ‖x⋆‖ in the working precision of x⋆.
template <Real T>
double error_floor(const ProductPoint<T>& x_star) {
  return 100.0 * num::to_double(num::eps<T>()) * num::to_double(norm2(ambient_concat(x_star)));
}

// ---------------------------------------------------------------------------

template <Real T, Real U>
ProductPoint<U> cast_point(const ProductPoint<T>& p) {
  std::vector<std::vector<Vector<U>>> terms;
  for (const auto& t : p.terms()) {
    std::vector<Vector<U>> f;
    for (const auto& v : t.factors()) {
      Vector<U> w;
      for (T x : v) w.push_back(U(x));
      f.push_back(std::move(w));
    }
    terms.push_back(std::move(f));
  }
  return ProductPoint<U>::from_factors(p.shape(), terms);
}

struct BoundOptions {
  double alpha = 0.9;
  double lipschitz_radius = 1e-3;
  std::size_t lipschitz_samples = 64;
  std::size_t taylor_directions = 8;
  std::vector<double> taylor_steps{1e-2, 1e-3, 1e-4};
  std::uint64_t seed = 0;
};

/// All bound ingredients at a computed minimizer x⋆. Sampled constants are
/// evaluated in binary64; E uses the working precision because ‖x₁ − x⋆‖
/// may sit far below binary64 resolution.
template <Real T>
BoundEstimates estimate_bounds(const ProductPoint<T>& x_star, const ProductPoint<T>* x1, double kappa_star,
                                  double residual_star, const BoundOptions& opts) {
  BoundEstimates b;
  b.alpha = opts.alpha;
  const ProductPoint<double> xd = cast_point<T, double>(x_star);
  b.C_hat = estimate_lipschitz_C(xd, opts.lipschitz_radius, opts.lipschitz_samples, opts.seed);
  b.C_samples = opts.lipschitz_samples;
  const auto g = estimate_second_order_constants(xd, opts.taylor_directions, opts.taylor_steps, opts.seed + 1);
  b.gamma_F_hat = g.gamma_F;
  b.gamma_I_hat = g.gamma_I;
  b.gamma_R_hat = g.gamma_R;
  if (x1 != nullptr && ambient_distance(*x1, x_star) > T(0)) b.E_hat = heuristic_E(*x1, x_star);
  b.theoretical_linear_rate = theoretical_linear_rate(kappa_star, b.C_hat, residual_star, opts.alpha);
  return b;
}

}  // namespace rgn
