#pragma once

// The CP parametrization Φ(x) = Σ_i x_i over a product of rank-1 manifolds,
// the least-squares residual, and its derivative in the Terracini basis.

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rgn/error.hpp"
#include "rgn/linalg.hpp"
#include "rgn/scalar.hpp"
#include "rgn/segre.hpp"

namespace rgn {

template <Real T>
struct Tensor {
  Shape shape;
  Vector<T> data;  // lexicographic, first index slowest

  Tensor() = default;
  Tensor(Shape s, Vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape.ambient_dim()) throw InvalidInput("Tensor: data length does not match shape");
    for (T x : data)
      if (!num::isfinite(x)) throw InvalidInput("Tensor: non-finite entry");
  }

  static Tensor zeros(const Shape& s) { return Tensor(s, Vector<T>(s.ambient_dim(), T(0))); }

  T norm() const { return norm2(data); }
};

template <Real T>
struct ConditionReport {
  T kappa;                   // +inf when sigma_min is below the rank tolerance
  T sigma_min;
  Vector<T> full_spectrum;   // singular values of the Terracini matrix
};

template <Real T>
Tensor<T> phi(const ProductPoint<T>& p) {
  Vector<T> out(p.shape().ambient_dim(), T(0));
  for (const auto& t : p.terms())
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += t.ambient()[j];
  return Tensor<T>(p.shape(), std::move(out));
}

template <Real T>
Vector<T> residual(const ProductPoint<T>& p, const Tensor<T>& target) {
  if (!(p.shape() == target.shape)) throw InvalidInput("residual: shape mismatch between point and target");
  Vector<T> f = phi(p).data;
  for (std::size_t j = 0; j < f.size(); ++j) f[j] -= target.data[j];
  return f;
}

template <Real T>
T objective(const ProductPoint<T>& p, const Tensor<T>& target) {
  const T n = norm2(residual(p, target));
  return T(0.5) * n * n;
}

/// Matrix of dΦ on T_xM in the Terracini basis: [U_1 ... U_r].
template <Real T>
Matrix<T> jacobian(const TangentBasis<T>& basis) {
  const std::size_t n = basis.blocks.front().rows();
  const std::size_t m = basis.block_cols();
  Matrix<T> j(n, basis.rank() * m);
  for (std::size_t i = 0; i < basis.rank(); ++i)
    for (std::size_t c = 0; c < m; ++c) {
      auto src = basis.blocks[i].col(c);
      std::copy(src.begin(), src.end(), j.col(i * m + c).begin());
    }
  return j;
}

template <Real T>
Matrix<T> jacobian(const ProductPoint<T>& p) {
  return jacobian(tangent_basis(p));
}

/// Everything the Gauss-Newton step needs at one point, computed once.
template <Real T>
struct Linearization {
  TangentBasis<T> basis;
  Matrix<T> jac;
  SvdFactors<T> svd;
  Vector<T> res;

  T sigma_min() const { return svd.singular_values.back(); }
  T sigma_max() const { return svd.singular_values.front(); }
};

template <Real T>
Linearization<T> linearize(const ProductPoint<T>& p, const Tensor<T>& target) {
  Linearization<T> lin;
  lin.res = residual(p, target);
  lin.basis = tangent_basis(p);
  lin.jac = jacobian(lin.basis);
  lin.svd = compact_svd(lin.jac);
  return lin;
}

/// Riemannian gradient Jᵀ F in Terracini coordinates.
template <Real T>
TangentVector<T> gradient(const Linearization<T>& lin) {
  return make_tangent(lin.basis, matTvec(lin.jac, std::span<const T>(lin.res)));
}

template <Real T>
TangentVector<T> gradient(const ProductPoint<T>& p, const Tensor<T>& target) {
  const Vector<T> f = residual(p, target);
  const TangentBasis<T> basis = tangent_basis(p);
  return make_tangent(basis, matTvec(jacobian(basis), std::span<const T>(f)));
}

// dF counts as non-injective below 1e3 * eps * ‖J‖₂.
template <Real T>
T injectivity_tolerance(T sigma_max) {
  return T(1000) * num::eps<T>() * sigma_max;
}

/// η = −J†F; throws IllConditionedJacobian if J is numerically rank deficient.
template <Real T>
TangentVector<T> gn_step(const Linearization<T>& lin) {
  if (!(lin.sigma_min() > injectivity_tolerance(lin.sigma_max())))
    throw IllConditionedJacobian("gn_step: Jacobian is numerically not injective");
  Vector<T> c = pinv_apply(lin.svd, std::span<const T>(lin.res));
  for (T& x : c) x = -x;
  return make_tangent(lin.basis, std::move(c));
}

template <Real T>
TangentVector<T> gn_step(const ProductPoint<T>& p, const Tensor<T>& target) {
  return gn_step(linearize(p, target));
}

template <Real T>
ConditionReport<T> condition_report(const Vector<T>& spectrum, std::size_t rows) {
  ConditionReport<T> r{T(0), spectrum.back(), spectrum};
  const T cutoff = rank_tolerance(rows, spectrum.size(), spectrum.front());
  r.kappa = (r.sigma_min <= cutoff || r.sigma_min == T(0)) ? num::infinity<T>() : T(1) / r.sigma_min;
  return r;
}

/// κ(x) = 1 / ς_m(U) for the Terracini matrix U.
template <Real T>
ConditionReport<T> condition_number(const ProductPoint<T>& p) {
  const Matrix<T> j = jacobian(p);
  return condition_report(compact_svd(j).singular_values, j.rows());
}

}  // namespace rgn
