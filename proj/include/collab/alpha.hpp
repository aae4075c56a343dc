#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <vector>

#include "collab/error.hpp"
#include "collab/params.hpp"

namespace collab {

// ---------------------------------------------------------------------------
// Complementary error function kernels
// ---------------------------------------------------------------------------

/**
 * e^{z^2} erfc(z). Direct product for small z; for larger z a Lentz
 * continued fraction, which stays finite where exp(z^2) would overflow.
 */
template <std::floating_point Real>
Real scaled_erfc(Real z) {
  using std::exp;
  using std::abs;
  if (z < Real(4)) return exp(z * z) * std::erfc(z);
  // erfc(z) e^{z^2} sqrt(pi) = 1 / (z + (1/2) / (z + 1 / (z + (3/2) / (z + ...))))
  constexpr Real tiny = std::numeric_limits<Real>::min() * 16;
  const Real eps = std::numeric_limits<Real>::epsilon();
  Real f = z;
  Real c = z;
  Real d = 0;
  for (int n = 1; n < 1000; ++n) {
    const Real a = Real(n) / 2;
    d = z + a * d;
    if (abs(d) < tiny) d = tiny;
    d = 1 / d;
    c = z + a / c;
    if (abs(c) < tiny) c = tiny;
    const Real delta = c * d;
    f *= delta;
    if (abs(delta - 1) <= eps) break;
  }
  return 1 / (std::sqrt(std::numbers::pi_v<Real>) * f);
}

namespace detail {

template <std::floating_point Real>
void require_positive(Real x, const char* what) {
  if (!(x > 0)) throw Error(ErrorCode::NonpositiveArgument, std::string(what) + " must be positive");
}

// e^{x^2} times the two-term and three-term asymptotic expansions.
template <std::floating_point Real>
Real scaled_erfc_lb(Real x) {
  return (1 / x - 1 / (2 * x * x * x)) / std::sqrt(std::numbers::pi_v<Real>);
}

template <std::floating_point Real>
Real scaled_erfc_ub(Real x) {
  const Real x2 = x * x;
  return (1 / x - 1 / (2 * x2 * x) + 3 / (4 * x2 * x2 * x)) / std::sqrt(std::numbers::pi_v<Real>);
}

}  // namespace detail

/// pi^{-1/2} (e^{-x^2}/x - e^{-x^2}/(2x^3)); a lower bound on erfc(x).
template <std::floating_point Real>
Real erfc_lb(Real x) {
  detail::require_positive(x, "x");
  return std::exp(-x * x) * detail::scaled_erfc_lb(x);
}

/// erfc_lb(x) + 3 e^{-x^2} / (4 x^5 sqrt(pi)); an upper bound on erfc(x).
template <std::floating_point Real>
Real erfc_ub(Real x) {
  detail::require_positive(x, "x");
  return std::exp(-x * x) * detail::scaled_erfc_ub(x);
}

// ---------------------------------------------------------------------------
// G(alpha)
// ---------------------------------------------------------------------------

/// C_m in the proven bracket (1, 1 + C_m/m) for alpha / sqrt(n*).
inline int bracket_constant(int m) { return m <= 20 ? 20 : 5; }

namespace detail {

enum class ErfcKernel { Exact, Lower, Upper };

/**
 * The root equation for the corruption modulator, with the effective cost
 * c/d in place of c. `kernel` selects erfc itself or one of its asymptotic
 * bounds; using the erfc upper bound yields a lower bound on G and vice
 * versa.
 */
template <std::floating_point Real>
Real g_function(Real alpha, const ProblemParams& p, ErfcKernel kernel) {
  using std::sqrt;
  if (p.agents < 5) throw Error(ErrorCode::InvalidParam, "G(alpha) is only defined for m >= 5");
  require_positive(alpha, "alpha");
  const Real s = p.sigma;
  const Real c = Real(p.cost) / Real(p.dim);
  const Real m = p.agents;
  const Real two_pi = 2 * std::numbers::pi_v<Real>;

  const Real share = s / sqrt(c * m);                // sigma / sqrt(c m)
  const Real root_scale = sqrt(s * sqrt(m / c));     // sqrt(sigma) (m/c)^{1/4}
  const Real a2 = alpha * alpha;

  const Real lead = ((m - 4) / (m - 2) * 4 * a2 / share - 1) * 4 * alpha / root_scale;
  const Real z = root_scale / (2 * sqrt(Real(2)) * alpha);
  Real k = 0;
  switch (kernel) {
    case ErfcKernel::Exact: k = scaled_erfc(z); break;
    case ErfcKernel::Lower: k = scaled_erfc_lb(z); break;
    case ErfcKernel::Upper: k = scaled_erfc_ub(z); break;
  }
  const Real tail = (4 * (m + 1) * a2 / (s * sqrt(m / c)) - 1) * sqrt(two_pi) * k;
  return lead - tail;
}

}  // namespace detail

template <std::floating_point Real = double>
Real g_of_alpha(Real alpha, const ProblemParams& p) {
  return detail::g_function(alpha, p, detail::ErfcKernel::Exact);
}

template <std::floating_point Real>
struct GBounds {
  Real lower;
  Real upper;
};

/// G_LB <= G <= G_UB, valid for alpha >= sqrt(n*).
template <std::floating_point Real = double>
GBounds<Real> g_bounds(Real alpha, const ProblemParams& p) {
  const Real root_n = std::sqrt(Real(p.pooled_share()));
  if (alpha < root_n * (1 - Real(1e-12))) {
    throw Error(ErrorCode::InvalidParam, "G bounds require alpha >= sqrt(n*)");
  }
  return {detail::g_function(alpha, p, detail::ErfcKernel::Upper),
          detail::g_function(alpha, p, detail::ErfcKernel::Lower)};
}

/// -128 / ((m-2) m^{5/2}): the value of G_UB at the bottom of the bracket.
template <std::floating_point Real = double>
Real g_upper_at_bracket_bottom(int m) {
  const Real mr = m;
  return Real(-128) / ((mr - 2) * mr * mr * std::sqrt(mr));
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

struct AlphaSolution {
  double alpha = 0.0;
  double a_m = 0.0;  // alpha / sqrt(n*)
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double residual = 0.0;
  int iterations = 0;
  int grid_sign_changes = 0;
  std::vector<std::string> warnings;
};

inline constexpr int kAlphaMaxIterations = 200;
inline constexpr int kAlphaScanPoints = 64;

/**
 * Bisection for G(alpha) = 0 on [sqrt(n*), (1 + C_m/m) sqrt(n*)].
 *
 * Throws NoSignChange when the endpoint values share a sign and
 * MaxIterations when the bracket cannot be shrunk below `tol`. A 64-point
 * scan of the bracket reports (but does not resolve) multiple sign changes.
 */
template <std::floating_point Real = double>
AlphaSolution solve_alpha(const ProblemParams& p, double tol = 0.0) {
  if (p.agents < 5) throw Error(ErrorCode::InvalidParam, "m <= 4 uses no corruption; alpha is undefined");
  const Real root_n = std::sqrt(Real(p.pooled_share()));
  if (tol <= 0.0) tol = 1e-12 * static_cast<double>(root_n);

  AlphaSolution out;
  Real lo = root_n;
  Real hi = (1 + Real(bracket_constant(p.agents)) / p.agents) * root_n;
  out.bracket_lo = static_cast<double>(lo);
  out.bracket_hi = static_cast<double>(hi);

  auto g = [&](Real a) { return g_of_alpha<Real>(a, p); };
  Real g_lo = g(lo);
  const Real g_hi = g(hi);
  if (std::signbit(g_lo) == std::signbit(g_hi) || g_lo == 0 || g_hi == 0) {
    if (g_lo == 0 || g_hi == 0) {
      out.alpha = static_cast<double>(g_lo == 0 ? lo : hi);
      out.a_m = out.alpha / static_cast<double>(root_n);
      return out;
    }
    throw Error(ErrorCode::NoSignChange, "G has the same sign at both ends of the bracket (m = " +
                                             std::to_string(p.agents) + ")");
  }

  bool converged = false;
  for (int it = 1; it <= kAlphaMaxIterations; ++it) {
    const Real mid = lo + (hi - lo) / 2;
    const Real g_mid = g(mid);
    out.iterations = it;
    if (g_mid == 0) {
      lo = hi = mid;
      converged = true;
      break;
    }
    if (std::signbit(g_mid) == std::signbit(g_lo)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
    if (static_cast<double>(hi - lo) <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error(ErrorCode::MaxIterations, "bisection did not reach the requested tolerance");

  const Real alpha = lo + (hi - lo) / 2;
  out.alpha = static_cast<double>(alpha);
  out.a_m = static_cast<double>(alpha / root_n);
  out.residual = static_cast<double>(g(alpha));

  const Real lo0 = root_n;
  const Real step = (Real(out.bracket_hi) - lo0) / (kAlphaScanPoints - 1);
  bool prev = std::signbit(g(lo0));
  for (int i = 1; i < kAlphaScanPoints; ++i) {
    const bool cur = std::signbit(g(lo0 + step * i));
    if (cur != prev) ++out.grid_sign_changes;
    prev = cur;
  }
  if (out.grid_sign_changes > 1) {
    out.warnings.push_back("G changes sign " + std::to_string(out.grid_sign_changes) +
                           " times on the bracket scan; returned the bisection root");
  }
  return out;
}

/// sigma = 1 market with n* = 10 for any m >= 5; used by the figure scans.
inline ProblemParams unit_market(int m) {
  return make_params(1.0, 1.0 / (100.0 * m), m, 1);
}

}  // namespace collab
