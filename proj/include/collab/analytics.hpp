#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "collab/alpha.hpp"
#include "collab/error.hpp"
#include "collab/mechanisms.hpp"
#include "collab/params.hpp"
#include "collab/quadrature.hpp"

namespace collab {

// Risks below are totals over the d coordinates. Each coordinate behaves as
// a scalar market with cost c/d, so the scalar expressions are multiplied by d.

// ---------------------------------------------------------------------------
// Reference penalties
// ---------------------------------------------------------------------------

struct BaselinePenalties {
  double p_min_ir = 0.0;            // best standalone penalty
  double global_min_social = 0.0;   // social optimum with free sharing
  double pool_ne_social = 0.0;      // social penalty at the pooling equilibrium
  double free_rider_penalty = 0.0;  // pooling, collect nothing, others at the pooled share
};

inline BaselinePenalties baseline_penalties(const ProblemParams& p) {
  const double m = p.agents;
  const double root = p.sigma * std::sqrt(p.cost * p.dim);
  return {2.0 * root, 2.0 * root * std::sqrt(m), root * (m + 1.0), root * std::sqrt(m) / (m - 1.0)};
}

// ---------------------------------------------------------------------------
// Gaussian integrals
// ---------------------------------------------------------------------------

/// E[1 / (L + x^2)] for x ~ N(0, 1).
inline double gauss_int_I(double L) {
  detail::require_positive(L, "L");
  return std::sqrt(std::numbers::pi / (2.0 * L)) * scaled_erfc(std::sqrt(L / 2.0));
}

/// E[1 / (L + x^2)^2] for x ~ N(0, 1).
inline double gauss_int_J(double L) {
  detail::require_positive(L, "L");
  return std::sqrt(std::numbers::pi / (2.0 * L)) * (1.0 / (2.0 * L) - 0.5) * scaled_erfc(std::sqrt(L / 2.0)) +
         1.0 / (2.0 * L);
}

// ---------------------------------------------------------------------------
// Cross-check-and-corrupt penalty
// ---------------------------------------------------------------------------

namespace detail {

inline void require_corruption_regime(const ProblemParams& p) {
  if (p.agents < 5) throw Error(ErrorCode::InvalidParam, "this quantity is defined for m >= 5");
}

// Breakpoints around the scale where the corrupted term 1/(s2 + spread x^2)
// stops dominating; for large spread the integrand changes over a very
// narrow window near zero.
inline std::vector<double> transition_breaks(double s2, double spread) {
  std::vector<double> out{0.0};
  if (!(spread > 0.0)) return out;
  const double t = std::sqrt(s2 / spread);
  for (double k : {0.1, 1.0, 10.0, 100.0}) {
    if (k * t < kNormalTruncation) {
      out.push_back(k * t);
      out.push_back(-k * t);
    }
  }
  return out;
}

// Scalar risk of the recommended estimator for an agent with n samples when
// the others sit at n*: |D| = n*, |D'| = (m - 2) n*.
inline double scalar_risk(double n, const ProblemParams& p, double alpha) {
  const double s2 = p.sigma * p.sigma;
  const double m = p.agents;
  const double ns = p.pooled_share();
  const double spread = alpha * alpha * (s2 / n + s2 / ns);
  const double clean = (n + ns) / s2;
  return normal_expectation([&](double x) { return 1.0 / ((m - 2.0) * ns / (s2 + spread * x * x) + clean); },
                            transition_breaks(s2, spread));
}

}  // namespace detail

/// Maximum risk when collecting n (real, > 0) samples and following the rest of the recommendation.
inline double rinf_max_risk(double n, const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidParam, "sample count must be positive");
  return p.dim * detail::scalar_risk(n, p, alpha);
}

/// p(n): maximum risk plus collection cost.
inline double penalty_closed_form(double n, const ProblemParams& p, double alpha) {
  return rinf_max_risk(n, p, alpha) + p.cost * n;
}

inline double penalty_at_nstar(const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  const double s2 = p.sigma * p.sigma;
  const double m = p.agents;
  const double ns = p.pooled_share();
  const double r = alpha / std::sqrt(m * ns);
  const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
  const double risk = s2 * r *
                      (2.0 * m * root_two_pi * r -
                       scaled_erfc(1.0 / (2.0 * std::numbers::sqrt2 * r)) * (m - 2.0) * std::numbers::pi) /
                      (4.0 * root_two_pi * alpha * alpha);
  return p.dim * risk + p.cost * ns;
}

/// dp/dn at n = n*; zero exactly when alpha solves G = 0.
inline double penalty_derivative_at_nstar(const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  const double s2 = p.sigma * p.sigma;
  const double m = p.agents;
  const double ns = p.pooled_share();
  const double a2 = alpha * alpha;
  const double r = alpha / std::sqrt(m * ns);
  const double bracket = 4.0 * r * (4.0 * a2 * m / ((m - 2.0) * ns) - 1.0) -
                         scaled_erfc(1.0 / (2.0 * std::numbers::sqrt2 * r)) *
                             (4.0 * a2 * (m + 1.0) / (m * ns) - 1.0) * std::sqrt(2.0 * std::numbers::pi);
  const double scalar = -s2 / (64.0 * (a2 / (m - 2.0)) * r * m * ns) * bracket + p.effective_cost();
  return p.dim * scalar;
}

/// p(n*) written through A = alpha / sqrt(n*).
inline double penalty_at_nstar_simplified(const ProblemParams& p, double a) {
  detail::require_corruption_regime(p);
  const double m = p.agents;
  const double a2 = a * a;
  return p.sigma * std::sqrt(p.cost * p.dim / m) * ((10.0 * a2 - 1.0) / (4.0 * a2 * (m + 1.0) / m - 1.0) + 1.0);
}

struct PenaltyProfile {
  std::vector<double> n_grid;
  std::vector<double> p_values;
  std::vector<double> risk_values;
  double derivative_at_nstar = 0.0;
};

inline PenaltyProfile penalty_profile(const ProblemParams& p, double alpha, const std::vector<double>& n_grid) {
  PenaltyProfile out;
  out.n_grid = n_grid;
  for (double n : n_grid) {
    const double risk = rinf_max_risk(n, p, alpha);
    out.risk_values.push_back(risk);
    out.p_values.push_back(risk + p.cost * n);
  }
  out.derivative_at_nstar = penalty_derivative_at_nstar(p, alpha);
  return out;
}

/**
 * Bayes risk under a N(0, ell^2) prior on each coordinate, for an agent with
 * n_own samples facing the equilibrium allocation.
 */
inline double bayes_risk_Rl(double ell, double n_own, const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  if (!(ell > 0.0)) throw Error(ErrorCode::InvalidParam, "ell must be positive");
  if (!(n_own > 0.0)) throw Error(ErrorCode::InvalidParam, "sample count must be positive");
  const double s2 = p.sigma * p.sigma;
  const double m = p.agents;
  const double ns = p.pooled_share();
  const double prior = 1.0 / (ell * ell);
  const double tilde = s2 / ns + 1.0 / (n_own / s2 + prior);
  const double a2 = alpha * alpha;
  const double scalar = normal_expectation(
      [&](double e) { return 1.0 / ((m - 2.0) * ns / (s2 + a2 * tilde * e * e) + (n_own + ns) / s2 + prior); },
      detail::transition_breaks(s2, a2 * tilde));
  return p.dim * scalar;
}

// ---------------------------------------------------------------------------
// Price of stability
// ---------------------------------------------------------------------------

inline double pos_mechany(const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  const double m = p.agents;
  const double a2 = alpha * alpha / p.pooled_share();
  return 0.5 * ((10.0 * a2 - 1.0) / (4.0 * a2 * (m + 1.0) / m - 1.0) + 1.0);
}

inline double pos_mechpk(double epsilon) { return 1.0 + 1.0 / (2.0 * corrupt_deploy_k(epsilon)); }

inline double pos_smallm(int m) {
  if (m < 2) throw Error(ErrorCode::InvalidParam, "need at least two agents");
  return (m + 1.0) / (2.0 * std::sqrt(static_cast<double>(m)));
}

/// Penalty per agent for m <= 4: pool and return everything.
inline double penalty_smallm(const ProblemParams& p) {
  return (1.0 + 1.0 / p.agents) * p.sigma * std::sqrt(p.cost * p.dim);
}

// ---------------------------------------------------------------------------
// High-dimensional mechanism
// ---------------------------------------------------------------------------

/// Fixed corruption weight 2 alpha^2 sigma^2 / n*.
inline double highdim_tau_sq(const ProblemParams& p, double alpha) {
  return 2.0 * alpha * alpha * p.sigma * p.sigma / p.pooled_share();
}

inline double highdim_penalty_bound(const ProblemParams& p, double alpha) {
  detail::require_corruption_regime(p);
  const double m = p.agents;
  const double a2 = alpha * alpha / p.pooled_share();
  return p.sigma * std::sqrt(p.cost * p.dim / m) * (m / (2.0 + (m - 2.0) / (1.0 + 2.0 * a2)) + 1.0);
}

inline double e_of_m(double m, double a) {
  const double a2 = a * a;
  return 4.0 * a2 * ((a2 - 1.0) * m + 1.0 - 4.0 * a2) * m / ((4.0 * a2 + m) * ((7.0 * a2 - 1.0) * m + 2.0 * a2));
}

// ---------------------------------------------------------------------------
// Pooling variants
// ---------------------------------------------------------------------------

/// Size-checked pooling: penalty for collecting n while the others sit at the pooled share.
inline double size_check_penalty(double n, const ProblemParams& p) {
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidParam, "sample count must be positive");
  const double s2 = p.sigma * p.sigma * p.dim;
  const double ns = p.pooled_share();
  const double m = p.agents;
  const double risk = n + kIntegralTolerance >= ns ? s2 / (n + (m - 1.0) * ns) : s2 / n;
  return risk + p.cost * n;
}

/// Corrupt-and-deploy penalty at the recommended profile.
inline double mechpk_penalty(const ProblemParams& p, double epsilon) {
  const int k = corrupt_deploy_k(epsilon);
  return (2.0 + 1.0 / k) * p.sigma * std::sqrt(p.cost * p.dim / p.agents);
}

struct ExploitRisks {
  double deployed = 0.0;
  double exploit = 0.0;
};

/// Risk of the deployed mean versus the fixed-weight exploit under corrupt-and-deploy.
inline ExploitRisks mechpk_exploit_risk(const ProblemParams& p, double epsilon) {
  const int k = corrupt_deploy_k(epsilon);
  const double m = p.agents;
  const double ns = p.pooled_share();
  const double s2 = p.sigma * p.sigma * p.dim;
  const double w = (1.0 / k) * m / (m - 1.0);
  return {(1.0 + 1.0 / k) * s2 / (m * ns), (1.0 + w) / (m + w) * s2 / ns};
}

/// Noise variance the exploit estimator assumes for the corrupted points.
inline double mechpk_exploit_tau_sq(const ProblemParams& p, double epsilon) {
  const int k = corrupt_deploy_k(epsilon);
  const double m = p.agents;
  return (1.0 / k) * (m / (m - 1.0)) * p.sigma * p.sigma;
}

}  // namespace collab
