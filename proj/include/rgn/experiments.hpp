#pragma once

// The 3x3x3 rank-2 pencil family x(s) = ((e2 − 2^{-s} e1)^{⊗3}, e2^{⊗3}) and
// the random / adversarial perturbation experiments run on it.

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rgn/cpd_model.hpp"
#include "rgn/diagnostics.hpp"
#include "rgn/random.hpp"
#include "rgn/scalar.hpp"
#include "rgn/segre.hpp"
#include "rgn/solver.hpp"

namespace rgn {

template <Real T>
struct PencilFamily {
  int s = 0;
  ProductPoint<T> point;
  Tensor<T> tensor;
};

template <Real T>
PencilFamily<T> make_pencil(int s) {
  if (s < 0) throw InvalidInput("make_pencil: s must be nonnegative");
  const Shape shape({3, 3, 3});
  Vector<T> first(3, T(0));
  if (s == 0) {
    first[0] = T(1);
  } else {
    T scale(1);
    for (int k = 0; k < s; ++k) scale /= T(2);
    first[0] = -scale;
    first[1] = T(1);
  }
  const Vector<T> e2{T(0), T(1), T(0)};
  ProductPoint<T> x = ProductPoint<T>::from_factors(shape, {{first, first, first}, {e2, e2, e2}});
  Tensor<T> a = phi(x);
  return {s, std::move(x), std::move(a)};
}

enum class ExperimentKind { random, adversarial };

// Zero-residual runs start farther out so the quadratic phase has two or more
// steps inside [1e-12, 1e-3].
inline constexpr double default_start_perturbation = 1e-7;
inline constexpr double default_zero_residual_start_perturbation = 8e-4;

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::random;
  std::vector<int> s_values{0, 1, 3, 5};
  double start_perturbation = default_start_perturbation;
  double data_perturbation = 1e-6;
  std::uint64_t seed = 1;
  bool zero_residual = false;  // run only the exact-target (quadratic) regime
  int max_iters = 40;
  BoundOptions bounds{};
  // Central-difference step and base offset for the adversarial gradient.
  double fd_step = 1e-6;
  double gradient_base_offset = 1e-3;
  // Fit windows. Pairs also need e_{k+1} above 10 * error floor.
  double fit_upper = 1e-3;
  double quadratic_fit_lower = 1e-12;
};

struct RegimeSummary {
  double kappa_star = 0;
  double residual_star = 0;
  double floor = 0;
  std::optional<OrderFit> order;
  std::optional<double> ratio;
};

template <Real T>
struct RegimeRun {
  Tensor<T> target;
  SolveResult<T> result;
  RegimeSummary summary;
};

template <Real T>
struct ExperimentRun {
  int s = 0;
  PencilFamily<T> pencil;
  ProductPoint<T> start;
  std::optional<RegimeRun<T>> linear;
  std::optional<RegimeRun<T>> quadratic;
  BoundEstimates bounds;
  // Adversarial only.
  std::optional<InequalityPair> wedin;
  Vector<T> data_direction;    // Z (unit)
  Vector<T> ascent_gradient;   // g in tangent coordinates at x(s)
  double z_dot_u14 = std::numeric_limits<double>::quiet_NaN();
};

template <Real T>
SolverConfig<T> experiment_solver_config(const ExperimentSpec& spec, const Tensor<T>& target) {
  SolverConfig<T> cfg;
  cfg.max_iters = spec.max_iters;
  const T scale = std::max(T(1), target.norm());
  cfg.grad_tol = T(10) * num::eps<T>() * num::eps<T>() * scale;
  cfg.step_tol = T(10) * num::eps<T>() * scale;
  return cfg;
}

template <Real T>
RegimeRun<T> run_regime(const ExperimentSpec& spec, const Tensor<T>& target, const ProductPoint<T>& start,
                        double fit_lower) {
  RegimeRun<T> run{target, solve(target, start, experiment_solver_config(spec, target)), {}};
  const ProductPoint<T>& x_star = run.result.point;
  rebase_errors(run.result.trace, x_star);
  const ConditionReport<T> c = condition_number(x_star);
  run.summary.kappa_star = num::to_double(c.kappa);
  run.summary.residual_star = num::to_double(norm2(residual(x_star, target)));
  run.summary.floor = error_floor(x_star);
  const std::vector<double> e = run.result.trace.errors();
  const double lo = 10.0 * run.summary.floor;
  try {
    run.summary.order = estimate_order(e, lo, spec.fit_upper, fit_lower);
  } catch (const InsufficientData&) {
  }
  try {
    run.summary.ratio = fit_linear_ratio(e, lo, spec.fit_upper, fit_lower);
  } catch (const InsufficientData&) {
  }
  return run;
}

namespace detail {

template <Real T>
void finish_bounds(const ExperimentSpec& spec, ExperimentRun<T>& out) {
  const RegimeRun<T>& reg = out.linear ? *out.linear : *out.quadratic;
  if (!converged(reg.result.trace.status)) return;
  const auto& its = reg.result.trace.iterates;
  const ProductPoint<T>* x1 = its.size() > 1 ? &its[1] : nullptr;
  BoundOptions bo = spec.bounds;
  bo.seed = spec.bounds.seed ^ (spec.seed * 0x9E3779B97F4A7C15ull) ^ static_cast<std::uint64_t>(out.s);
  out.bounds = estimate_bounds(reg.result.point, x1, reg.summary.kappa_star, reg.summary.residual_star, bo);
}

template <Real T>
ExperimentRun<T> random_one(const ExperimentSpec& spec, int s) {
  ExperimentRun<T> out;
  out.s = s;
  out.pencil = make_pencil<T>(s);
  Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(s));
  const TangentBasis<T> basis = tangent_basis(out.pencil.point);
  const TangentVector<T> x_dir = random_unit_tangent(basis, rng);
  out.start = retract(out.pencil.point, scaled(x_dir, T(spec.start_perturbation)));

  Vector<T> z = rng.gaussian_vector<T>(out.pencil.tensor.data.size());
  const T nz = norm2(z);
  for (T& v : z) v /= nz;
  out.data_direction = z;
  Vector<T> perturbed = out.pencil.tensor.data;
  for (std::size_t j = 0; j < perturbed.size(); ++j) perturbed[j] += T(spec.data_perturbation) * z[j];

  if (!spec.zero_residual) out.linear = run_regime(spec, Tensor<T>(out.pencil.tensor.shape, perturbed), out.start, 0.0);
  out.quadratic = run_regime(spec, out.pencil.tensor, out.start, spec.quadratic_fit_lower);
  finish_bounds(spec, out);
  return out;
}

}  // namespace detail

/// f(c) = ½ ‖(J(x(s))† − J(R(x(s), c))†) N‖² over tangent coordinates c.
template <Real T>
class PseudoinverseGapFunctional {
 public:
  PseudoinverseGapFunctional(ProductPoint<T> base, Vector<T> probe) : base_(std::move(base)), probe_(std::move(probe)) {
    basis_ = tangent_basis(base_);
    const SvdFactors<T> svd = compact_svd(jacobian(basis_));
    base_image_ = matvec(ambient_pseudoinverse(basis_, svd), std::span<const T>(probe_));
  }

  const TangentBasis<T>& basis() const { return basis_; }

  T operator()(const Vector<T>& coords) const {
    const ProductPoint<T> x = retract(base_, make_tangent(basis_, coords));
    const TangentBasis<T> b = tangent_basis(x);
    const SvdFactors<T> svd = compact_svd(jacobian(b));
    const Vector<T> img = matvec(ambient_pseudoinverse(b, svd), std::span<const T>(probe_));
    const T n = norm2(subtract(std::span<const T>(base_image_), std::span<const T>(img)));
    return T(0.5) * n * n;
  }

  // Central differences in every coordinate around `at`.
  Vector<T> gradient(const Vector<T>& at, T h) const {
    Vector<T> g(at.size());
    for (std::size_t j = 0; j < at.size(); ++j) {
      Vector<T> plus = at, minus = at;
      plus[j] += h;
      minus[j] -= h;
      g[j] = ((*this)(plus) - (*this)(minus)) / (T(2) * h);
    }
    return g;
  }

  T directional_derivative(const Vector<T>& at, const Vector<T>& unit_dir, T h) const {
    Vector<T> plus = at, minus = at;
    for (std::size_t j = 0; j < at.size(); ++j) {
      plus[j] += h * unit_dir[j];
      minus[j] -= h * unit_dir[j];
    }
    return ((*this)(plus) - (*this)(minus)) / (T(2) * h);
  }

 private:
  ProductPoint<T> base_;
  Vector<T> probe_;
  TangentBasis<T> basis_;
  Vector<T> base_image_;
};

/// Left singular vector of the smallest singular value of the Terracini matrix.
template <Real T>
Vector<T> smallest_left_singular_vector(const ProductPoint<T>& x) {
  const SvdFactors<T> svd = compact_svd(jacobian(x));
  const auto col = svd.left.col(svd.left.cols() - 1);
  return Vector<T>(col.begin(), col.end());
}

namespace detail {

template <Real T>
ExperimentRun<T> adversarial_one(const ExperimentSpec& spec, int s) {
  ExperimentRun<T> out;
  out.s = s;
  out.pencil = make_pencil<T>(s);
  Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(s));
  Vector<T> probe = rng.gaussian_vector<T>(out.pencil.tensor.data.size());
  const PseudoinverseGapFunctional<T> f(out.pencil.point, probe);

  // f has a minimum at x(s), so the ascent direction is read off at a nearby
  // base point instead.
  Vector<T> base = random_unit_tangent(f.basis(), rng).coords;
  for (T& v : base) v *= T(spec.gradient_base_offset);
  Vector<T> g = f.gradient(base, T(spec.fd_step));
  out.ascent_gradient = g;
  const T ng = norm2(g);
  if (!(ng > T(0))) throw Error("adversarial_experiment: vanishing ascent gradient");
  for (T& v : g) v *= T(spec.start_perturbation) / ng;
  out.start = retract(out.pencil.point, make_tangent(f.basis(), g));

  const Vector<T> z = smallest_left_singular_vector(out.start);
  out.data_direction = z;
  Vector<T> perturbed = out.pencil.tensor.data;
  for (std::size_t j = 0; j < perturbed.size(); ++j) perturbed[j] += T(spec.data_perturbation) * z[j];
  {
    const Vector<T> u = smallest_left_singular_vector(out.start);
    out.z_dot_u14 = num::to_double(dot(std::span<const T>(z), std::span<const T>(u)));
  }

  if (!spec.zero_residual) {
    out.linear = run_regime(spec, Tensor<T>(out.pencil.tensor.shape, perturbed), out.start, 0.0);
    if (converged(out.linear->result.trace.status)) {
      try {
        out.wedin = wedin_gap(out.start, out.linear->result.point);
      } catch (const IllConditionedJacobian&) {
      }
    }
  } else {
    out.quadratic = run_regime(spec, out.pencil.tensor, out.start, spec.quadratic_fit_lower);
  }
  finish_bounds(spec, out);
  return out;
}

template <Real T, class Fn>
std::vector<ExperimentRun<T>> run_all(const ExperimentSpec& spec, Fn one) {
  if (spec.s_values.empty()) throw InvalidInput("experiment: s_values must be nonempty");
  if (!(spec.start_perturbation > 0) || !(spec.data_perturbation > 0))
    throw InvalidInput("experiment: perturbation magnitudes must be positive");
  std::vector<std::future<ExperimentRun<T>>> jobs;
  for (int s : spec.s_values) jobs.push_back(std::async(std::launch::async, one, spec, s));
  std::vector<ExperimentRun<T>> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace detail

template <Real T>
std::vector<ExperimentRun<T>> random_experiment(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentKind::random) throw InvalidInput("random_experiment: spec kind is not random");
  return detail::run_all<T>(spec, &detail::random_one<T>);
}

template <Real T>
std::vector<ExperimentRun<T>> adversarial_experiment(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentKind::adversarial) throw InvalidInput("adversarial_experiment: spec kind is not adversarial");
  return detail::run_all<T>(spec, &detail::adversarial_one<T>);
}

template <Real T>
std::vector<ExperimentRun<T>> run_experiment(const ExperimentSpec& spec) {
  return spec.kind == ExperimentKind::random ? random_experiment<T>(spec) : adversarial_experiment<T>(spec);
}

}  // namespace rgn
