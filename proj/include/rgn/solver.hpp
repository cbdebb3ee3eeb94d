#pragma once

// Plain (unglobalized) Riemannian Gauss-Newton:
//   x_{k+1} = R_{x_k}(−(dF_{x_k})† F(x_k)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rgn/cpd_model.hpp"
#include "rgn/error.hpp"
#include "rgn/scalar.hpp"
#include "rgn/segre.hpp"

namespace rgn {

enum class SolveStatus {
  converged_gradient,
  converged_step,
  max_iterations,
  jacobian_singular,
  retraction_failed,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged_gradient: return "converged-gradient";
    case SolveStatus::converged_step: return "converged-step";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::jacobian_singular: return "jacobian-singular";
    case SolveStatus::retraction_failed: return "retraction-failed";
  }
  return "unknown";
}

inline bool converged(SolveStatus s) {
  return s == SolveStatus::converged_gradient || s == SolveStatus::converged_step;
}

template <Real T>
struct SolverConfig {
  int max_iters = 100;
  T grad_tol = T(1e-12);
  T step_tol = T(1e-14);
  std::optional<ProductPoint<T>> record_reference;
  RetractionOptions<T> retraction{};
};

// Values are reported in binary64; NaN marks "not available".
struct IterationRecord {
  int iter = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double residual_norm = 0;
  double gradient_norm = 0;
  double step_norm = std::numeric_limits<double>::quiet_NaN();
  double sigma_min = 0;
  double kappa = 0;
};

template <Real T>
struct IterationTrace {
  std::vector<IterationRecord> records;
  std::vector<ProductPoint<T>> iterates;  // iterates[k] is x_k
  SolveStatus status = SolveStatus::max_iterations;
  std::string message;

  std::vector<double> errors() const {
    std::vector<double> e;
    for (const auto& r : records) e.push_back(r.error);
    return e;
  }
};

template <Real T>
struct SolveResult {
  ProductPoint<T> point;
  IterationTrace<T> trace;
};

/// Ambient product-space distance, minimised over term permutations.
template <Real T>
T distance(const ProductPoint<T>& p, const ProductPoint<T>& q) {
  if (p.rank() != q.rank()) throw InvalidInput("distance: rank mismatch");
  if (!(p.shape() == q.shape())) throw InvalidInput("distance: shape mismatch");
  std::vector<std::size_t> perm(p.rank());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  T best = num::infinity<T>();
  do {
    Vector<T> diff;
    for (std::size_t i = 0; i < p.rank(); ++i) {
      const auto& a = p.term(perm[i]).ambient();
      const auto& b = q.term(i).ambient();
      for (std::size_t j = 0; j < a.size(); ++j) diff.push_back(a[j] - b[j]);
    }
    best = std::min(best, norm2(diff));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Recompute every trace error against `reference` (typically the final iterate).
template <Real T>
void rebase_errors(IterationTrace<T>& trace, const ProductPoint<T>& reference) {
  for (std::size_t k = 0; k < trace.records.size() && k < trace.iterates.size(); ++k)
    trace.records[k].error = num::to_double(distance(trace.iterates[k], reference));
}

template <Real T>
SolveResult<T> solve(const Tensor<T>& target, const ProductPoint<T>& x0, const SolverConfig<T>& cfg = {}) {
  if (!(target.shape == x0.shape())) throw InvalidInput("solve: target shape does not match initial point");
  if (!(cfg.grad_tol > T(0)) || !(cfg.step_tol > T(0))) throw InvalidInput("solve: tolerances must be positive");
  if (cfg.record_reference && cfg.record_reference->rank() != x0.rank())
    throw InvalidInput("solve: reference rank does not match initial point");

  IterationTrace<T> trace;
  ProductPoint<T> x = x0;
  trace.iterates.push_back(x);
  for (int k = 0;; ++k) {
    const Linearization<T> lin = linearize(x, target);
    const ConditionReport<T> cond = condition_report(lin.svd.singular_values, lin.jac.rows());
    IterationRecord rec;
    rec.iter = k;
    rec.residual_norm = num::to_double(norm2(lin.res));
    const T grad_norm = gradient(lin).norm();
    rec.gradient_norm = num::to_double(grad_norm);
    rec.sigma_min = num::to_double(cond.sigma_min);
    rec.kappa = num::to_double(cond.kappa);
    if (cfg.record_reference) rec.error = num::to_double(distance(x, *cfg.record_reference));

    TangentVector<T> eta;
    try {
      eta = gn_step(lin);
    } catch (const IllConditionedJacobian& e) {
      trace.records.push_back(rec);
      trace.status = SolveStatus::jacobian_singular;
      trace.message = e.what();
      break;
    }
    const T step_norm = eta.norm();
    rec.step_norm = num::to_double(step_norm);
    trace.records.push_back(rec);

    if (grad_norm <= cfg.grad_tol) {
      trace.status = SolveStatus::converged_gradient;
      break;
    }
    if (step_norm <= cfg.step_tol) {
      trace.status = SolveStatus::converged_step;
      break;
    }
    if (k >= cfg.max_iters) {
      trace.status = SolveStatus::max_iterations;
      break;
    }
    try {
      x = retract(x, eta, cfg.retraction);
    } catch (const RetractionFailure& e) {
      trace.status = SolveStatus::retraction_failed;
      trace.message = e.what();
      break;
    }
    trace.iterates.push_back(x);
  }
  return {x, std::move(trace)};
}

}  // namespace rgn
