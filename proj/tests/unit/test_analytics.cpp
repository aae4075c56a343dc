#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "collab/analytics.hpp"

using namespace collab;

namespace {

const ProblemParams kP9 = make_params(1.0, 1.0 / 900.0, 9);

// E[f(x)], x ~ N(0,1), over the whole line with a double-exponential rule.
template <class F>
double oracle_expectation(F f) {
  boost::math::quadrature::sinh_sinh<double> rule;
  return rule.integrate([&](double x) {
    return f(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  });
}

// Reference values from a 50-digit evaluation.
struct IJ {
  double L, I, J;
};
constexpr IJ kIJ[] = {
    {0.1, 3.1325218028522154, 19.096348112834968},
    {1.0, 0.65567954241879847, 0.5},
    {10.0, 0.092078514445389392, 0.0085646684995747740},
    {100.0, 0.0099028596471731921, 9.8084474649269892e-05},
};

}  // namespace

TEST(Baselines, CanonicalValues) {
  const auto b = baseline_penalties(kP9);
  EXPECT_NEAR(b.p_min_ir, 1.0 / 15.0, 1e-15);
  EXPECT_NEAR(b.global_min_social, 0.2, 1e-15);
  EXPECT_NEAR(b.pool_ne_social, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.free_rider_penalty, 0.0125, 1e-15);
}

TEST(Baselines, HighDimScalesWithRootD) {
  const auto b1 = baseline_penalties(make_params(1.0, 1.0 / 900.0, 9));
  const auto b3 = baseline_penalties(ProblemParams{1.0, 1.0 / 900.0, 9, 3});
  EXPECT_NEAR(b3.global_min_social / b1.global_min_social, std::sqrt(3.0), 1e-14);
}

TEST(GaussInt, ReferenceValues) {
  for (const auto& r : kIJ) {
    EXPECT_NEAR(gauss_int_I(r.L), r.I, 1e-14 * std::max(1.0, r.I)) << r.L;
    EXPECT_NEAR(gauss_int_J(r.L), r.J, 1e-13 * std::max(1.0, r.J)) << r.L;
  }
}

TEST(GaussInt, MatchQuadratureOracle) {
  for (const auto& r : kIJ) {
    const double L = r.L;
    EXPECT_NEAR(gauss_int_I(L), oracle_expectation([L](double x) { return 1.0 / (L + x * x); }), 1e-10);
    EXPECT_NEAR(gauss_int_J(L), oracle_expectation([L](double x) { return 1.0 / ((L + x * x) * (L + x * x)); }),
                1e-10);
  }
}

TEST(GaussInt, LargeLLimit) {
  EXPECT_NEAR(gauss_int_I(1e6) * 1e6, 1.0, 2e-6);
  EXPECT_THROW(gauss_int_I(0.0), Error);
  EXPECT_THROW(gauss_int_J(-1.0), Error);
}

TEST(Penalty, RiskMatchesOracle) {
  const double alpha = solve_alpha(kP9).alpha;
  for (double n : {1.0, 5.0, 10.0, 20.0, 37.5}) {
    const double a2 = alpha * alpha;
    const double oracle = oracle_expectation([&](double x) {
      return 1.0 / (7.0 * 10.0 / (1.0 + a2 * (1.0 / n + 0.1) * x * x) + (n + 10.0));
    });
    EXPECT_NEAR(rinf_max_risk(n, kP9, alpha), oracle, 1e-12) << n;
  }
}

TEST(Penalty, ClosedFormAtNStarMatchesQuadrature) {
  for (int m : {5, 9, 20, 21, 100, 500}) {
    const auto p = unit_market(m);
    const auto s = solve_alpha(p);
    const double q = penalty_closed_form(10.0, p, s.alpha);
    EXPECT_NEAR(penalty_at_nstar(p, s.alpha), q, 1e-9) << m;
    EXPECT_NEAR(penalty_at_nstar_simplified(p, s.a_m), q, 1e-9) << m;
    // also off the root
    EXPECT_NEAR(penalty_at_nstar(p, 2.0 * s.alpha), penalty_closed_form(10.0, p, 2.0 * s.alpha), 1e-9) << m;
  }
}

TEST(Penalty, DerivativeVanishesAtRoot) {
  for (int m : {5, 9, 21, 100, 500}) {
    const auto p = unit_market(m);
    EXPECT_LT(std::abs(penalty_derivative_at_nstar(p, solve_alpha(p).alpha)), 1e-9) << m;
  }
}

TEST(Penalty, DerivativeMatchesFiniteDifferenceOffRoot) {
  for (double scale : {0.9, 1.3, 2.5}) {
    const double alpha = scale * solve_alpha(kP9).alpha;
    const double h = 0.05;
    const auto p = [&](double n) { return penalty_closed_form(n, kP9, alpha); };
    const double d1 = (p(10 + h) - p(10 - h)) / (2 * h);
    const double d2 = (p(10 + 2 * h) - p(10 - 2 * h)) / (4 * h);
    EXPECT_NEAR(penalty_derivative_at_nstar(kP9, alpha), (4 * d1 - d2) / 3, 1e-10) << scale;
  }
}

TEST(Penalty, MinimumAtNStar) {
  const double alpha = solve_alpha(kP9).alpha;
  const double at = penalty_closed_form(10.0, kP9, alpha);
  EXPECT_LT(at, penalty_closed_form(5.0, kP9, alpha));
  EXPECT_LT(at, penalty_closed_form(20.0, kP9, alpha));
  EXPECT_LT(at, 2.0 * std::sqrt(kP9.cost));
  EXPECT_NEAR(at, 0.037260200902232944, 1e-12);
}

TEST(Penalty, ConvexOnIntegerGrid) {
  const double alpha = solve_alpha(kP9).alpha;
  std::vector<double> pv;
  for (int n = 1; n <= 40; ++n) pv.push_back(penalty_closed_form(n, kP9, alpha));
  for (std::size_t i = 1; i + 1 < pv.size(); ++i) EXPECT_LE(pv[i], (pv[i - 1] + pv[i + 1]) / 2 + 1e-10) << i + 1;
  for (std::size_t a = 0; a < pv.size(); ++a)
    for (std::size_t b = a + 2; b < pv.size(); b += 2) EXPECT_LE(pv[(a + b) / 2], (pv[a] + pv[b]) / 2 + 1e-10);
}

TEST(Penalty, LimitsInAlpha) {
  for (double n : {3.0, 10.0, 25.0}) {
    EXPECT_NEAR(rinf_max_risk(n, kP9, 0.0), 1.0 / (n + 80.0), 1e-14);
    EXPECT_NEAR(rinf_max_risk(n, kP9, 1e9), 1.0 / (n + 10.0), 1e-9);
  }
}

TEST(Penalty, RiskDecreasingInN) {
  const double alpha = solve_alpha(kP9).alpha;
  double prev = 1e9;
  for (double n = 1; n <= 40; n += 1) {
    const double r = rinf_max_risk(n, kP9, alpha);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Penalty, ProfileConsistency) {
  const double alpha = solve_alpha(kP9).alpha;
  const auto prof = penalty_profile(kP9, alpha, {5, 10, 20});
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_DOUBLE_EQ(prof.p_values[i], prof.risk_values[i] + kP9.cost * prof.n_grid[i]);
  EXPECT_LT(std::abs(prof.derivative_at_nstar), 1e-9);
}

TEST(Penalty, FiniteForHugeMarkets) {
  const auto p = make_params(1.0, 1.0 / 1e6, 10000);
  const auto s = solve_alpha(p);
  const double v = penalty_at_nstar(p, s.alpha);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, penalty_at_nstar_simplified(p, s.a_m), 1e-12);
}

TEST(Pos, Formulas) {
  const double alpha_one = std::sqrt(10.0);
  EXPECT_NEAR(pos_mechany(kP9, alpha_one), 56.0 / 31.0, 1e-14);
  EXPECT_DOUBLE_EQ(pos_mechpk(0.25), 1.25);
  EXPECT_DOUBLE_EQ(pos_mechpk(0.5), 1.5);
  EXPECT_DOUBLE_EQ(pos_smallm(4), 1.25);
  EXPECT_NEAR(penalty_smallm(make_params(1.0, 1.0 / 64.0, 4)), 0.15625, 1e-15);
}

TEST(Pos, IdentityAndRange) {
  for (int m = 5; m <= 200; m += 13) {
    const auto p = unit_market(m);
    const double alpha = solve_alpha(p).alpha;
    const double pos = pos_mechany(p, alpha);
    EXPECT_GT(pos, 1.0);
    EXPECT_LT(pos, 2.0);
    EXPECT_NEAR(pos, m * penalty_at_nstar(p, alpha) / (2.0 * std::sqrt(p.cost * m)), 1e-9);
  }
}

TEST(Bayes, ApproachesMaxRiskFromBelow) {
  const double alpha = solve_alpha(kP9).alpha;
  const double rinf = rinf_max_risk(10.0, kP9, alpha);
  double prev = 0.0;
  for (double ell : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const double r = bayes_risk_Rl(ell, 10.0, kP9, alpha);
    EXPECT_LE(r, rinf);
    EXPECT_GT(r, prev);
    prev = r;
  }
  EXPECT_GT(bayes_risk_Rl(1000.0, 10.0, kP9, alpha), rinf * (1 - 1e-4));
  EXPECT_LT(bayes_risk_Rl(1e-4, 10.0, kP9, alpha), 1e-7);
}

TEST(HighDim, BoundAndE) {
  const auto p = make_params(1.0, 1.0 / 900.0, 9);
  const ProblemParams p3{1.0, 1.0 / 900.0, 9, 3};  // same c; formulas only
  EXPECT_NEAR(e_of_m(9, 1.0), -108.0 / (13.0 * 56.0), 1e-15);
  const double a1 = 1.3 * std::sqrt(static_cast<double>(p.pooled_share()));
  const double a3 = 1.3 * std::sqrt(p3.pooled_share());
  EXPECT_NEAR(highdim_penalty_bound(p3, a3) / highdim_penalty_bound(p, a1), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(highdim_tau_sq(p, 2.0), 2.0 * 4.0 / 10.0, 1e-15);
}

TEST(HighDim, FigureTwo) {
  for (int m = 5; m <= 500; ++m) {
    const auto s = solve_alpha(unit_market(m));
    EXPECT_LT(e_of_m(m, s.a_m), 5.0 / m) << m;
  }
}

TEST(SizeCheck, PenaltyMinimisedAtShare) {
  const double at = size_check_penalty(10.0, kP9);
  EXPECT_NEAR(at, 0.2 / 9.0, 1e-15);
  for (int n = 1; n <= 60; ++n)
    if (n != 10) {
      EXPECT_GT(size_check_penalty(n, kP9), at) << n;
    }
}

TEST(CorruptDeploy, ClosedForms) {
  EXPECT_NEAR(mechpk_penalty(kP9, 0.5), 1.0 / 30.0, 1e-15);
  const auto r = mechpk_exploit_risk(kP9, 0.5);
  EXPECT_NEAR(r.deployed, 2.0 / 90.0, 1e-15);
  EXPECT_NEAR(r.exploit, 17.0 / 810.0, 1e-15);
  for (double eps : {0.5, 0.25, 0.1, 0.05}) {
    const auto q = mechpk_exploit_risk(kP9, eps);
    EXPECT_LT(q.exploit, q.deployed);
    EXPECT_LE(pos_mechpk(eps), 1.0 + eps);
  }
  // no corruption limit: both approach the pooled risk
  const auto lim = mechpk_exploit_risk(kP9, 0.051);
  EXPECT_NEAR(lim.deployed / (1.0 / 90.0), 1.1, 1e-12);
}

TEST(Quadrature, HardyLittlewoodShift) {
  for (double M : {1.0, 10.0}) {
    const double k = std::sqrt(M);
    const double centred = normal_expectation([M](double x) { return std::min(x * x, M); }, {-k, k});
    for (double a : {-2.0, -0.5, 0.5, 2.0}) {
      const double moved =
          normal_expectation([M, a](double x) { return std::min((x - a) * (x - a), M); }, {a - k, a + k});
      EXPECT_LE(centred, moved) << M << " " << a;
    }
  }
}
