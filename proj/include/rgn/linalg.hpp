#pragma once

// Small dense linear algebra: column-major matrices, a one-sided Jacobi SVD,
// Moore-Penrose solves and Householder complements. Sizes in this library
// never exceed a few hundred rows, so clarity wins over blocking.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "rgn/error.hpp"
#include "rgn/scalar.hpp"

namespace rgn {

template <Real T>
using Vector = std::vector<T>;

template <Real T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> column_major)
      : rows_(rows), cols_(cols), data_(std::move(column_major)) {
    if (data_.size() != rows_ * cols_) throw InvalidInput("Matrix: entry count does not match rows*cols");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  // Build from row-major nested initializer data; convenient in tests.
  static Matrix from_rows(const std::vector<std::vector<T>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) throw InvalidInput("Matrix::from_rows: ragged rows");
      for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static Matrix diagonal(std::span<const T> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<T> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const T> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T x) { return num::isfinite(x); });
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Vector helpers

template <Real T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
  T s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <Real T>
T norm2(std::span<const T> a) {
  // Scaled accumulation so tiny trace errors (well below sqrt(min normal))
  // keep full relative precision.
  T scale(0);
  for (T x : a) scale = std::max(scale, num::abs(x));
  if (scale == T(0)) return T(0);
  T s(0);
  for (T x : a) {
    const T y = x / scale;
    s += y * y;
  }
  return scale * num::sqrt(s);
}

template <Real T>
T norm2(const Vector<T>& a) {
  return norm2(std::span<const T>(a));
}

template <Real T>
Vector<T> subtract(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw InvalidInput("subtract: length mismatch");
  Vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <Real T>
Vector<T> scaled(std::span<const T> a, T factor) {
  Vector<T> out(a.begin(), a.end());
  for (T& x : out) x *= factor;
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products

template <Real T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

template <Real T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimension mismatch");
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T bkj = b(k, j);
      if (bkj == T(0)) continue;
      for (std::size_t i = 0; i < a.rows(); ++i) c(i, j) += a(i, k) * bkj;
    }
  return c;
}

template <Real T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput("subtract: shape mismatch");
  Matrix<T> c(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.data().size(); ++k) c.data()[k] = a.data()[k] - b.data()[k];
  return c;
}

template <Real T>
Vector<T> matvec(const Matrix<T>& a, std::span<const T> x) {
  if (a.cols() != x.size()) throw InvalidInput("matvec: dimension mismatch");
  Vector<T> y(a.rows(), T(0));
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const T xj = x[j];
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] += a(i, j) * xj;
  }
  return y;
}

// Aᵀx without forming the transpose.
template <Real T>
Vector<T> matTvec(const Matrix<T>& a, std::span<const T> x) {
  if (a.rows() != x.size()) throw InvalidInput("matTvec: dimension mismatch");
  Vector<T> y(a.cols(), T(0));
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

template <Real T>
T frobenius_norm(const Matrix<T>& a) {
  return norm2(std::span<const T>(a.data()));
}

template <Real T>
T max_abs(const Matrix<T>& a) {
  T m(0);
  for (T x : a.data()) m = std::max(m, num::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// SVD

template <Real T>
struct SvdFactors {
  Matrix<T> left;              // n x k, orthonormal columns
  Vector<T> singular_values;   // nonincreasing, length k
  Matrix<T> right;             // p x k, orthonormal columns
};

namespace detail {

// Extend the orthonormal columns [0, filled) of q to a full orthonormal set by
// Gram-Schmidt against standard basis vectors.
template <Real T>
void complete_orthonormal(Matrix<T>& q, std::size_t filled) {
  const std::size_t n = q.rows();
  std::size_t next = filled;
  for (std::size_t e = 0; e < n && next < q.cols(); ++e) {
    Vector<T> v(n, T(0));
    v[e] = T(1);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < next; ++j) {
        const T c = dot(std::span<const T>(q.col(j)), std::span<const T>(v));
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * q(i, j);
      }
    const T nv = norm2(v);
    if (nv < T(0.5)) continue;
    for (std::size_t i = 0; i < n; ++i) q(i, next) = v[i] / nv;
    ++next;
  }
}

// One-sided (Hestenes) Jacobi for rows >= cols.
template <Real T>
SvdFactors<T> jacobi_svd_tall(const Matrix<T>& a) {
  const std::size_t n = a.rows();
  const std::size_t p = a.cols();
  Matrix<T> w = a;
  Matrix<T> v = Matrix<T>::identity(p);
  const T tol = num::eps<T>() * T(n);
  constexpr int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        T alpha(0), beta(0), gamma(0);
        for (std::size_t r = 0; r < n; ++r) {
          alpha += w(r, i) * w(r, i);
          beta += w(r, j) * w(r, j);
          gamma += w(r, i) * w(r, j);
        }
        if (alpha == T(0) || beta == T(0)) continue;
        if (num::abs(gamma) <= tol * num::sqrt(alpha) * num::sqrt(beta)) continue;
        rotated = true;
        const T zeta = (beta - alpha) / (T(2) * gamma);
        const T az = num::abs(zeta);
        T t = az > T(1) / tol ? T(1) / (T(2) * az) : T(1) / (az + num::sqrt(T(1) + zeta * zeta));
        if (zeta < T(0)) t = -t;
        const T c = T(1) / num::sqrt(T(1) + t * t);
        const T s = c * t;
        for (std::size_t r = 0; r < n; ++r) {
          const T wi = w(r, i);
          const T wj = w(r, j);
          w(r, i) = c * wi - s * wj;
          w(r, j) = s * wi + c * wj;
        }
        for (std::size_t r = 0; r < p; ++r) {
          const T vi = v(r, i);
          const T vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  Vector<T> sigma(p);
  for (std::size_t j = 0; j < p; ++j) sigma[j] = norm2(std::span<const T>(w.col(j)));
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdFactors<T> f{Matrix<T>(n, p), Vector<T>(p), Matrix<T>(p, p)};
  std::size_t nonzero = 0;
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t j = order[k];
    f.singular_values[k] = sigma[j];
    for (std::size_t r = 0; r < p; ++r) f.right(r, k) = v(r, j);
    if (sigma[j] > T(0)) {
      for (std::size_t r = 0; r < n; ++r) f.left(r, k) = w(r, j) / sigma[j];
      ++nonzero;
    }
  }
  if (nonzero < p) complete_orthonormal(f.left, nonzero);
  return f;
}

}  // namespace detail

template <Real T>
SvdFactors<T> compact_svd(const Matrix<T>& a) {
  if (!a.all_finite()) throw InvalidInput("compact_svd: non-finite entry");
  if (a.rows() >= a.cols()) return detail::jacobi_svd_tall(a);
  SvdFactors<T> t = detail::jacobi_svd_tall(transpose(a));
  return {std::move(t.right), std::move(t.singular_values), std::move(t.left)};
}

template <Real T>
T rank_tolerance(std::size_t rows, std::size_t cols, T sigma_max) {
  return T(std::max(rows, cols)) * num::eps<T>() * sigma_max;
}

// A†b from precomputed factors of A.
template <Real T>
Vector<T> pinv_apply(const SvdFactors<T>& f, std::span<const T> b) {
  const std::size_t n = f.left.rows();
  const std::size_t p = f.right.rows();
  if (b.size() != n) throw InvalidInput("pinv_apply: right-hand side length does not match rows");
  Vector<T> x(p, T(0));
  if (f.singular_values.empty()) return x;
  const T cutoff = rank_tolerance(n, p, f.singular_values.front());
  for (std::size_t k = 0; k < f.singular_values.size(); ++k) {
    const T s = f.singular_values[k];
    if (s <= cutoff || s == T(0)) break;
    const T coef = dot(std::span<const T>(f.left.col(k)), b) / s;
    for (std::size_t r = 0; r < p; ++r) x[r] += coef * f.right(r, k);
  }
  return x;
}

/// Minimal-norm least-squares solution of Ax = b.
template <Real T>
Vector<T> pinv_apply(const Matrix<T>& a, std::span<const T> b) {
  if (b.size() != a.rows()) throw InvalidInput("pinv_apply: right-hand side length does not match rows");
  return pinv_apply(compact_svd(a), b);
}

template <Real T>
Matrix<T> pseudoinverse(const SvdFactors<T>& f) {
  const std::size_t n = f.left.rows();
  const std::size_t p = f.right.rows();
  Matrix<T> out(p, n);
  if (f.singular_values.empty()) return out;
  const T cutoff = rank_tolerance(n, p, f.singular_values.front());
  for (std::size_t k = 0; k < f.singular_values.size(); ++k) {
    const T s = f.singular_values[k];
    if (s <= cutoff || s == T(0)) break;
    for (std::size_t j = 0; j < n; ++j) {
      const T lj = f.left(j, k) / s;
      for (std::size_t i = 0; i < p; ++i) out(i, j) += f.right(i, k) * lj;
    }
  }
  return out;
}

template <Real T>
Matrix<T> pseudoinverse(const Matrix<T>& a) {
  return pseudoinverse(compact_svd(a));
}

template <Real T>
T smallest_singular_value(const Matrix<T>& a) {
  if (a.cols() > a.rows()) throw InvalidInput("smallest_singular_value: more columns than rows");
  if (a.cols() == 0) throw InvalidInput("smallest_singular_value: empty matrix");
  return compact_svd(a).singular_values.back();
}

template <Real T>
T spectral_norm(const Matrix<T>& a) {
  if (a.rows() == 0 || a.cols() == 0) return T(0);
  return compact_svd(a).singular_values.front();
}

/// Orthonormal basis of the complement of v, taken from columns 2..n of the
/// Householder reflector that maps v onto a multiple of e1.
template <Real T>
Matrix<T> orthonormal_complement(std::span<const T> v) {
  const std::size_t n = v.size();
  if (n == 0) throw InvalidInput("orthonormal_complement: empty vector");
  const T nv = norm2(v);
  if (!(nv > T(0))) throw InvalidInput("orthonormal_complement: zero vector");
  Vector<T> u(v.begin(), v.end());
  for (T& x : u) x /= nv;
  const T sign = u[0] >= T(0) ? T(1) : T(-1);
  u[0] += sign;
  const T uu = dot(std::span<const T>(u), std::span<const T>(u));
  Matrix<T> q(n, n - 1);
  for (std::size_t j = 1; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) q(i, j - 1) = (i == j ? T(1) : T(0)) - T(2) * u[i] * u[j] / uu;
  return q;
}

}  // namespace rgn
