#pragma once

// The manifold of rank-1 tensors (affine cone over the Segre variety), its
// r-fold product, Terracini tangent bases and the HOOI-based retraction.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rgn/error.hpp"
#include "rgn/linalg.hpp"
#include "rgn/scalar.hpp"

namespace rgn {

class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<std::size_t> mode_sizes) : modes_(std::move(mode_sizes)) {
    if (modes_.size() < 3) throw InvalidInput("Shape: tensor order must be at least 3");
    for (std::size_t m : modes_)
      if (m < 2) throw InvalidInput("Shape: every mode size must be at least 2");
  }

  std::size_t order() const noexcept { return modes_.size(); }
  std::size_t mode(std::size_t k) const { return modes_.at(k); }
  const std::vector<std::size_t>& modes() const noexcept { return modes_; }

  std::size_t ambient_dim() const {
    return std::accumulate(modes_.begin(), modes_.end(), std::size_t{1}, std::multiplies<>());
  }
  // 1 + sum_k (m_k - 1)
  std::size_t segre_dim() const {
    std::size_t d = 1;
    for (std::size_t m : modes_) d += m - 1;
    return d;
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> modes_;
};

// Vectorized outer product a1 ⊗ ... ⊗ ad, first index slowest.
template <Real T>
Vector<T> outer_product(const std::vector<Vector<T>>& factors) {
  Vector<T> out{T(1)};
  for (const auto& f : factors) {
    Vector<T> next(out.size() * f.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = 0; j < f.size(); ++j) next[i * f.size() + j] = out[i] * f[j];
    out = std::move(next);
  }
  return out;
}

template <Real T>
class RankOnePoint {
 public:
  RankOnePoint() = default;
  RankOnePoint(const Shape& shape, std::vector<Vector<T>> factors) : factors_(std::move(factors)) {
    if (factors_.size() != shape.order()) throw InvalidInput("RankOnePoint: factor count does not match tensor order");
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (factors_[k].size() != shape.mode(k)) throw InvalidInput("RankOnePoint: factor length does not match mode size");
      for (T x : factors_[k])
        if (!num::isfinite(x)) throw InvalidInput("RankOnePoint: non-finite factor entry");
      if (norm2(factors_[k]) == T(0)) throw InvalidInput("RankOnePoint: zero factor");
    }
    ambient_ = outer_product(factors_);
  }

  const std::vector<Vector<T>>& factors() const noexcept { return factors_; }
  const Vector<T>& factor(std::size_t k) const { return factors_.at(k); }
  const Vector<T>& ambient() const noexcept { return ambient_; }

 private:
  std::vector<Vector<T>> factors_;
  Vector<T> ambient_;
};

template <Real T>
class ProductPoint {
 public:
  ProductPoint() = default;
  ProductPoint(Shape shape, std::vector<RankOnePoint<T>> terms) : shape_(std::move(shape)), terms_(std::move(terms)) {
    if (terms_.empty()) throw InvalidInput("ProductPoint: rank must be at least 1");
    if (terms_.size() * shape_.segre_dim() >= shape_.ambient_dim())
      throw InvalidInput("ProductPoint: r * dim(S) must be smaller than the ambient dimension");
  }

  // Convenience: terms given as raw factor lists.
  static ProductPoint from_factors(const Shape& shape, const std::vector<std::vector<Vector<T>>>& terms) {
    std::vector<RankOnePoint<T>> pts;
    pts.reserve(terms.size());
    for (const auto& f : terms) pts.emplace_back(shape, f);
    return ProductPoint(shape, std::move(pts));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return terms_.size(); }
  const RankOnePoint<T>& term(std::size_t i) const { return terms_.at(i); }
  const std::vector<RankOnePoint<T>>& terms() const noexcept { return terms_; }
  // Dimension of the product manifold, r * dim(S).
  std::size_t dim() const { return terms_.size() * shape_.segre_dim(); }

 private:
  Shape shape_;
  std::vector<RankOnePoint<T>> terms_;
};

// Concatenated ambient representation in R^{rN}.
template <Real T>
Vector<T> ambient_concat(const ProductPoint<T>& p) {
  Vector<T> out;
  out.reserve(p.rank() * p.shape().ambient_dim());
  for (const auto& t : p.terms()) out.insert(out.end(), t.ambient().begin(), t.ambient().end());
  return out;
}

// Index-matched distance in R^{rN}.
template <Real T>
T ambient_distance(const ProductPoint<T>& p, const ProductPoint<T>& q) {
  if (p.rank() != q.rank() || !(p.shape() == q.shape())) throw InvalidInput("ambient_distance: rank or shape mismatch");
  const Vector<T> a = ambient_concat(p);
  const Vector<T> b = ambient_concat(q);
  return norm2(subtract(std::span<const T>(a), std::span<const T>(b)));
}

// ---------------------------------------------------------------------------
// Tangent spaces

template <Real T>
struct TermBasis {
  Matrix<T> block;                      // N x dim(S), orthonormal columns
  std::vector<Matrix<T>> complements;   // Q_k, m_k x (m_k - 1)
};

template <Real T>
struct TangentBasis {
  std::vector<Matrix<T>> blocks;
  std::vector<std::vector<Matrix<T>>> complements;

  std::size_t rank() const noexcept { return blocks.size(); }
  std::size_t block_cols() const { return blocks.empty() ? 0 : blocks.front().cols(); }
};

/// Orthonormal basis of the tangent space at a rank-1 tensor. Column 0 is the
/// normalized tensor; then for each mode k the columns Q_k ⊗ (other unit
/// factors), in mode order.
template <Real T>
TermBasis<T> tangent_basis(const RankOnePoint<T>& p) {
  const std::size_t d = p.factors().size();
  if (d == 0) throw InvalidInput("tangent_basis: empty point");
  std::vector<Vector<T>> unit(d);
  TermBasis<T> out;
  std::size_t cols = 1;
  for (std::size_t k = 0; k < d; ++k) {
    const Vector<T>& a = p.factor(k);
    const T na = norm2(a);
    if (!(na > T(0))) throw InvalidInput("tangent_basis: zero factor");
    unit[k] = scaled(std::span<const T>(a), T(1) / na);
    out.complements.push_back(orthonormal_complement(std::span<const T>(a)));
    cols += a.size() - 1;
  }
  const std::size_t n = outer_product(unit).size();
  out.block = Matrix<T>(n, cols);

  const Vector<T> lead = outer_product(unit);
  std::copy(lead.begin(), lead.end(), out.block.col(0).begin());
  std::size_t c = 1;
  for (std::size_t k = 0; k < d; ++k) {
    const Matrix<T>& q = out.complements[k];
    for (std::size_t j = 0; j < q.cols(); ++j) {
      std::vector<Vector<T>> f = unit;
      f[k] = Vector<T>(q.col(j).begin(), q.col(j).end());
      const Vector<T> v = outer_product(f);
      std::copy(v.begin(), v.end(), out.block.col(c).begin());
      ++c;
    }
  }
  return out;
}

template <Real T>
TangentBasis<T> tangent_basis(const ProductPoint<T>& p) {
  TangentBasis<T> b;
  for (const auto& t : p.terms()) {
    TermBasis<T> tb = tangent_basis(t);
    b.blocks.push_back(std::move(tb.block));
    b.complements.push_back(std::move(tb.complements));
  }
  return b;
}

template <Real T>
struct TangentVector {
  Vector<T> coords;                     // length r * dim(S)
  std::vector<Vector<T>> ambient_terms; // r vectors in R^N

  T norm() const { return norm2(coords); }
};

template <Real T>
TangentVector<T> make_tangent(const TangentBasis<T>& basis, Vector<T> coords) {
  const std::size_t m = basis.block_cols();
  if (coords.size() != basis.rank() * m) throw InvalidInput("make_tangent: coordinate length does not match basis");
  TangentVector<T> v{std::move(coords), {}};
  for (std::size_t i = 0; i < basis.rank(); ++i)
    v.ambient_terms.push_back(matvec(basis.blocks[i], std::span<const T>(v.coords).subspan(i * m, m)));
  return v;
}

template <Real T>
TangentVector<T> scaled(const TangentVector<T>& v, T t) {
  TangentVector<T> out = v;
  for (T& x : out.coords) x *= t;
  for (auto& a : out.ambient_terms)
    for (T& x : a) x *= t;
  return out;
}

template <Real T>
Vector<T> ambient_concat(const TangentVector<T>& v) {
  Vector<T> out;
  for (const auto& a : v.ambient_terms) out.insert(out.end(), a.begin(), a.end());
  return out;
}

template <Real T>
TangentVector<T> project_ambient_to_tangent(const TangentBasis<T>& basis, const std::vector<Vector<T>>& delta) {
  if (delta.size() != basis.rank()) throw InvalidInput("project_ambient_to_tangent: term count mismatch");
  const std::size_t m = basis.block_cols();
  Vector<T> coords;
  coords.reserve(basis.rank() * m);
  for (std::size_t i = 0; i < basis.rank(); ++i) {
    if (delta[i].size() != basis.blocks[i].rows())
      throw InvalidInput("project_ambient_to_tangent: ambient length mismatch");
    const Vector<T> c = matTvec(basis.blocks[i], std::span<const T>(delta[i]));
    coords.insert(coords.end(), c.begin(), c.end());
  }
  return make_tangent(basis, std::move(coords));
}

template <Real T>
TangentVector<T> project_ambient_to_tangent(const ProductPoint<T>& p, const std::vector<Vector<T>>& delta) {
  if (delta.size() != p.rank()) throw InvalidInput("project_ambient_to_tangent: term count mismatch");
  for (const auto& d : delta)
    if (d.size() != p.shape().ambient_dim()) throw InvalidInput("project_ambient_to_tangent: ambient length mismatch");
  return project_ambient_to_tangent(tangent_basis(p), delta);
}

// Split a concatenated R^{rN} vector into r terms.
template <Real T>
std::vector<Vector<T>> split_terms(std::span<const T> concat, std::size_t rank) {
  if (rank == 0 || concat.size() % rank != 0) throw InvalidInput("split_terms: length is not a multiple of rank");
  const std::size_t n = concat.size() / rank;
  std::vector<Vector<T>> out;
  for (std::size_t i = 0; i < rank; ++i) out.emplace_back(concat.begin() + i * n, concat.begin() + (i + 1) * n);
  return out;
}

// ---------------------------------------------------------------------------
// Retraction

class RetractionFailure : public Error {
 public:
  RetractionFailure(const std::string& what, std::size_t term, std::vector<std::vector<double>> last_factors)
      : Error(what), term_(term), last_factors_(std::move(last_factors)) {}
  std::size_t term() const noexcept { return term_; }
  // Unit factors of the failing term at the last HOOI iterate.
  const std::vector<std::vector<double>>& last_factors() const noexcept { return last_factors_; }

 private:
  std::size_t term_;
  std::vector<std::vector<double>> last_factors_;
};

// ambient(p_i) + η_i vanished; no rank-1 point is a sensible answer.
class SingularStep : public RetractionFailure {
 public:
  using RetractionFailure::RetractionFailure;
};

template <Real T>
struct RetractionOptions {
  int max_hooi_iters = 50;
  // 1e-14 in binary64, scaled to the working precision otherwise.
  T tol = T(1e-14) * (num::eps<T>() / T(num::eps<double>()));
};

namespace detail {

// Contract a tensor with unit vectors in every mode except `skip`.
template <Real T>
Vector<T> contract_except(const Vector<T>& tensor, const Shape& shape, const std::vector<Vector<T>>& u, std::size_t skip) {
  const std::size_t d = shape.order();
  Vector<T> out(shape.mode(skip), T(0));
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t lin = 0; lin < tensor.size(); ++lin) {
    T w = tensor[lin];
    for (std::size_t k = 0; k < d && w != T(0); ++k)
      if (k != skip) w *= u[k][idx[k]];
    out[idx[skip]] += w;
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < shape.mode(k)) break;
      idx[k] = 0;
    }
  }
  return out;
}

template <Real T>
std::size_t first_significant(const Vector<T>& a) {
  T m(0);
  for (T x : a) m = std::max(m, num::abs(x));
  const T thresh = num::sqrt(num::eps<T>()) * m;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (num::abs(a[i]) > thresh) return i;
  return 0;
}

template <Real T>
std::vector<std::vector<double>> to_double_factors(const std::vector<Vector<T>>& f) {
  std::vector<std::vector<double>> out;
  for (const auto& v : f) {
    std::vector<double> g;
    for (T x : v) g.push_back(num::to_double(x));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace detail

/// Balanced, sign-canonical factors for unit directions u and weight lambda:
/// every factor has norm |lambda|^(1/d); all but the last have a positive
/// leading entry and the last carries the sign.
template <Real T>
RankOnePoint<T> canonical_rank_one(const Shape& shape, std::vector<Vector<T>> u, T lambda) {
  const std::size_t d = u.size();
  T sign = lambda < T(0) ? T(-1) : T(1);
  for (std::size_t k = 0; k + 1 < d; ++k) {
    if (u[k][detail::first_significant(u[k])] < T(0)) {
      for (T& x : u[k]) x = -x;
      sign = -sign;
    }
  }
  const T c = num::nth_root(num::abs(lambda), static_cast<int>(d));
  for (std::size_t k = 0; k < d; ++k)
    for (T& x : u[k]) x *= c;
  for (T& x : u[d - 1]) x *= sign;
  return RankOnePoint<T>(shape, std::move(u));
}

/// Rank-1 HOOI approximation of `tensor`, initialised from `init`.
template <Real T>
RankOnePoint<T> rank_one_hooi(const Vector<T>& tensor, const Shape& shape, const RankOnePoint<T>& init,
                              std::size_t term, const RetractionOptions<T>& opts = {}) {
  const std::size_t d = shape.order();
  if (norm2(tensor) == T(0)) throw SingularStep("retract: ambient point plus step is the zero tensor", term, {});
  std::vector<Vector<T>> u(d);
  for (std::size_t k = 0; k < d; ++k) {
    const T n = norm2(init.factor(k));
    u[k] = scaled(std::span<const T>(init.factor(k)), T(1) / n);
  }
  bool converged = false;
  for (int it = 0; it < opts.max_hooi_iters && !converged; ++it) {
    T change(0);
    for (std::size_t k = 0; k < d; ++k) {
      Vector<T> v = detail::contract_except(tensor, shape, u, k);
      const T nv = norm2(v);
      if (nv == T(0))
        throw SingularStep("retract: HOOI contraction vanished", term, detail::to_double_factors(u));
      for (T& x : v) x /= nv;
      change = std::max(change, norm2(subtract(std::span<const T>(v), std::span<const T>(u[k]))));
      u[k] = std::move(v);
    }
    converged = change <= opts.tol;
  }
  if (!converged)
    throw RetractionFailure("retract: rank-1 HOOI did not converge", term, detail::to_double_factors(u));
  const Vector<T> last = detail::contract_except(tensor, shape, u, d - 1);
  const T lambda = dot(std::span<const T>(last), std::span<const T>(u[d - 1]));
  if (lambda == T(0)) throw SingularStep("retract: rank-1 weight vanished", term, detail::to_double_factors(u));
  return canonical_rank_one(shape, std::move(u), lambda);
}

/// R(p, η): per term, the HOOI rank-1 approximation of ambient(p_i) + η_i.
template <Real T>
ProductPoint<T> retract(const ProductPoint<T>& p, const TangentVector<T>& eta, const RetractionOptions<T>& opts = {}) {
  if (eta.ambient_terms.size() != p.rank()) throw InvalidInput("retract: tangent vector rank mismatch");
  for (T x : eta.coords)
    if (!num::isfinite(x)) throw InvalidInput("retract: non-finite tangent vector");
  std::vector<RankOnePoint<T>> terms;
  terms.reserve(p.rank());
  for (std::size_t i = 0; i < p.rank(); ++i) {
    const auto& step = eta.ambient_terms[i];
    if (std::all_of(step.begin(), step.end(), [](T x) { return x == T(0); })) {
      terms.push_back(p.term(i));
      continue;
    }
    Vector<T> target = p.term(i).ambient();
    if (step.size() != target.size()) throw InvalidInput("retract: ambient length mismatch");
    for (std::size_t j = 0; j < target.size(); ++j) target[j] += step[j];
    terms.push_back(rank_one_hooi(target, p.shape(), p.term(i), i, opts));
  }
  return ProductPoint<T>(p.shape(), std::move(terms));
}

/// ‖R(p, tη) − p − tη‖ over the concatenated ambient terms.
template <Real T>
T retraction_defect(const ProductPoint<T>& p, const TangentVector<T>& eta, T t, const RetractionOptions<T>& opts = {}) {
  if (t == T(0)) return T(0);
  if (t < T(0)) throw InvalidInput("retraction_defect: step size must be nonnegative");
  const TangentVector<T> step = scaled(eta, t);
  const ProductPoint<T> q = retract(p, step, opts);
  Vector<T> diff;
  for (std::size_t i = 0; i < p.rank(); ++i) {
    const auto& a = q.term(i).ambient();
    const auto& b = p.term(i).ambient();
    for (std::size_t j = 0; j < a.size(); ++j) diff.push_back(a[j] - b[j] - step.ambient_terms[i][j]);
  }
  return norm2(diff);
}

}  // namespace rgn
