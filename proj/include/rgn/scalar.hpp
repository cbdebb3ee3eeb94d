#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <type_traits>

#if defined(RGN_HAVE_FLOAT128)
#include <quadmath.h>
#endif

namespace rgn {

#if defined(RGN_HAVE_FLOAT128)
using float128 = __float128;
#endif

// Real scalar abstraction. Every numerical routine in the library is a
// template over a type satisfying this concept; double is the workhorse and
// __float128 is available when libquadmath is found at configure time.
template <class T>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr const char* name = "double";
  static constexpr double epsilon() { return std::numeric_limits<double>::epsilon(); }
  static double sqrt(double x) { return std::sqrt(x); }
  static double abs(double x) { return std::fabs(x); }
  static double cbrt(double x) { return std::cbrt(x); }
  static bool isfinite(double x) { return std::isfinite(x); }
  static double infinity() { return std::numeric_limits<double>::infinity(); }
};

template <>
struct scalar_traits<long double> {
  static constexpr const char* name = "long double";
  static constexpr long double epsilon() { return std::numeric_limits<long double>::epsilon(); }
  static long double sqrt(long double x) { return std::sqrt(x); }
  static long double abs(long double x) { return std::fabs(x); }
  static long double cbrt(long double x) { return std::cbrt(x); }
  static bool isfinite(long double x) { return std::isfinite(x); }
  static long double infinity() { return std::numeric_limits<long double>::infinity(); }
};

#if defined(RGN_HAVE_FLOAT128)
template <>
struct scalar_traits<float128> {
  static constexpr const char* name = "float128";
  static constexpr float128 epsilon() { return FLT128_EPSILON; }
  static float128 sqrt(float128 x) { return sqrtq(x); }
  static float128 abs(float128 x) { return fabsq(x); }
  static float128 cbrt(float128 x) { return cbrtq(x); }
  static bool isfinite(float128 x) { return finiteq(x) != 0; }
  static float128 infinity() { return HUGE_VALQ; }
};
#endif

template <class T>
concept Real = requires { scalar_traits<T>::epsilon(); };

namespace num {

template <Real T>
constexpr T eps() {
  return scalar_traits<T>::epsilon();
}
template <Real T>
T sqrt(T x) {
  return scalar_traits<T>::sqrt(x);
}
template <Real T>
T abs(T x) {
  return scalar_traits<T>::abs(x);
}
template <Real T>
T cbrt(T x) {
  return scalar_traits<T>::cbrt(x);
}
template <Real T>
bool isfinite(T x) {
  return scalar_traits<T>::isfinite(x);
}
template <Real T>
T infinity() {
  return scalar_traits<T>::infinity();
}

// Positive real d-th root: binary64 estimate refined by Newton in T.
template <Real T>
T nth_root(T x, int d) {
  if (x == T(0) || d == 1) return x;
  T y = T(std::pow(static_cast<double>(x), 1.0 / d));
  for (int it = 0; it < 3; ++it) {
    T yd1(1);
    for (int k = 0; k < d - 1; ++k) yd1 *= y;
    y -= (yd1 * y - x) / (T(d) * yd1);
  }
  return y;
}

// Reporting happens in binary64 regardless of the working precision.
template <Real T>
double to_double(T x) {
  return static_cast<double>(x);
}

}  // namespace num
}  // namespace rgn
