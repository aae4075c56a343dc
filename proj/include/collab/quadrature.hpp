#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collab/error.hpp"

namespace collab {

/// Absolute error accepted from the adaptive rule.
inline constexpr double kQuadratureTolerance = 1e-12;
/// Standard-normal expectations are truncated to [-12, 12].
inline constexpr double kNormalTruncation = 12.0;

inline double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/**
 * Adaptive Gauss-Kronrod on [a, b]. Throws QuadratureFailure when the
 * error estimate exceeds `abs_tol`.
 */
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = kQuadratureTolerance) {
  double err = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13, &err);
  if (!std::isfinite(value) || err > abs_tol) {
    throw Error(ErrorCode::QuadratureFailure, "adaptive quadrature did not reach the requested tolerance");
  }
  return value;
}

/// E[f(x)] for x ~ N(0, 1). Interior breakpoints (kinks of f) are honoured.
template <class F>
double normal_expectation(F&& f, std::vector<double> breaks = {}) {
  breaks.push_back(-kNormalTruncation);
  breaks.push_back(kNormalTruncation);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = std::max(breaks[i], -kNormalTruncation);
    const double b = std::min(breaks[i + 1], kNormalTruncation);
    if (b <= a) continue;
    total += integrate([&](double x) { return f(x) * standard_normal_pdf(x); }, a, b);
  }
  return total;
}

}  // namespace collab
