#pragma once

// Seeded self-checks behind `rgn_cli check`. Each returns a pass flag and a
// one-line summary of the worst case seen.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "rgn/cpd_model.hpp"
#include "rgn/diagnostics.hpp"
#include "rgn/experiments.hpp"
#include "rgn/random.hpp"
#include "rgn/segre.hpp"

namespace rgn {

struct CheckReport {
  bool passed = false;
  std::string summary;
};

template <Real T>
ProductPoint<T> random_point(const Shape& shape, std::size_t rank, Rng& rng) {
  std::vector<std::vector<Vector<T>>> terms(rank);
  for (auto& t : terms)
    for (std::size_t m : shape.modes()) t.push_back(rng.gaussian_vector<T>(m));
  return ProductPoint<T>::from_factors(shape, terms);
}

namespace detail {

inline const Shape& cube3() {
  static const Shape s({3, 3, 3});
  return s;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

}  // namespace detail

inline const std::vector<double>& default_slope_steps() {
  static const std::vector<double> t{1e-2, 1e-3, 1e-4, 1e-5};
  return t;
}

/// Slopes of the phi and identity Taylor remainders over random configurations.
inline CheckReport check_taylor(std::uint64_t seed, std::size_t configs = 100) {
  Rng rng(seed);
  double lo = 1e300, hi = -1e300;
  const auto& ts = default_slope_steps();
  for (std::size_t c = 0; c < configs; ++c) {
    const ProductPoint<double> x = random_point<double>(detail::cube3(), 2, rng);
    const TangentVector<double> eta = random_unit_tangent(tangent_basis(x), rng);
    for (TaylorMap map : {TaylorMap::phi, TaylorMap::identity}) {
      std::vector<double> r;
      for (double t : ts) r.push_back(taylor_remainder(map, x, retract(x, scaled(eta, t))));
      const double k = loglog_slope(ts, r);
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
  }
  return {lo >= 1.9 && hi <= 2.1, "taylor slopes in [" + detail::fmt(lo) + ", " + detail::fmt(hi) + "]"};
}

inline CheckReport check_retraction(std::uint64_t seed, std::size_t configs = 100) {
  Rng rng(seed);
  double lo = 1e300, hi = -1e300;
  const auto& ts = default_slope_steps();
  for (std::size_t c = 0; c < configs; ++c) {
    const ProductPoint<double> x = random_point<double>(detail::cube3(), 2, rng);
    const TangentVector<double> eta = random_unit_tangent(tangent_basis(x), rng);
    std::vector<double> r;
    for (double t : ts) r.push_back(retraction_defect(x, eta, t));
    const double k = loglog_slope(ts, r);
    lo = std::min(lo, k);
    hi = std::max(hi, k);
  }
  return {lo >= 1.9 && hi <= 2.1, "retraction slopes in [" + detail::fmt(lo) + ", " + detail::fmt(hi) + "]"};
}

// Nearby pairs around x(s), s cycling through {0,1,3,5}; step sizes are
// log-uniform in [1e-6, 1e-2] scaled down by κ(x(s)) so both points stay
// well conditioned.
template <class Check>
CheckReport check_pairs(std::uint64_t seed, std::size_t pairs, double slack, const char* label, Check inequality) {
  Rng rng(seed);
  double worst = -1e300;
  std::size_t violations = 0;
  const int svals[] = {0, 1, 3, 5};
  for (int s : svals) {
    const PencilFamily<double> pf = make_pencil<double>(s);
    const double kappa = condition_number(pf.point).kappa;
    const TangentBasis<double> basis = tangent_basis(pf.point);
    for (std::size_t k = 0; k < pairs; ++k) {
      const double t = std::pow(10.0, -2.0 - 4.0 * rng.uniform()) / kappa;
      const ProductPoint<double> y = retract(pf.point, scaled(random_unit_tangent(basis, rng), t));
      const InequalityPair ip = inequality(y, pf.point);
      const double excess = ip.rhs > 0 ? ip.lhs / ip.rhs - 1.0 : (ip.lhs > 0 ? 1.0 : -1.0);
      worst = std::max(worst, excess);
      if (!ip.holds(slack)) ++violations;
    }
  }
  return {violations == 0, std::string(label) + ": " + std::to_string(violations) + " violations, max lhs/rhs - 1 = " +
                               detail::fmt(worst)};
}

inline CheckReport check_wedin(std::uint64_t seed, std::size_t pairs_per_s = 1000, double slack = 1e-8) {
  return check_pairs(seed, pairs_per_s, slack, "wedin",
                     [](const ProductPoint<double>& a, const ProductPoint<double>& b) { return wedin_gap(a, b); });
}

inline CheckReport check_weyl(std::uint64_t seed, std::size_t pairs_per_s = 1000, double slack = 1e-8) {
  return check_pairs(seed, pairs_per_s, slack, "weyl",
                     [](const ProductPoint<double>& a, const ProductPoint<double>& b) { return weyl_check(a, b); });
}

/// Riemannian gradient against central differences of f(R(x, h e_j)).
inline CheckReport check_gradient(std::uint64_t seed, std::size_t configs = 20, double h = 1e-6, double tol = 1e-4) {
  Rng rng(seed);
  double worst = 0;
  for (std::size_t c = 0; c < configs; ++c) {
    const ProductPoint<double> x = random_point<double>(detail::cube3(), 2, rng);
    const Tensor<double> a(detail::cube3(), rng.gaussian_vector<double>(27));
    const TangentBasis<double> basis = tangent_basis(x);
    const TangentVector<double> g = gradient(x, a);
    for (std::size_t j = 0; j < g.coords.size(); ++j) {
      Vector<double> e(g.coords.size(), 0.0);
      e[j] = h;
      const double fp = objective(retract(x, make_tangent(basis, e)), a);
      e[j] = -h;
      const double fm = objective(retract(x, make_tangent(basis, e)), a);
      worst = std::max(worst, std::abs((fp - fm) / (2 * h) - g.coords[j]));
    }
  }
  return {worst <= tol, "gradient max abs deviation " + detail::fmt(worst)};
}

}  // namespace rgn
