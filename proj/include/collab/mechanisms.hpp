#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "collab/allocation.hpp"
#include "collab/error.hpp"
#include "collab/params.hpp"
#include "collab/rng.hpp"

namespace collab {

namespace detail {

inline std::size_t submission_dim(const std::vector<Dataset>& subs, const ProblemParams& p) {
  for (const Dataset& s : subs) {
    if (s.empty()) continue;
    if (s.dim() != static_cast<std::size_t>(p.dim)) {
      throw Error(ErrorCode::DimensionMismatch, "submission dimension differs from the market dimension");
    }
  }
  return static_cast<std::size_t>(p.dim);
}

/// Union of every submission except agent i's, in agent order.
inline Dataset others_union(const std::vector<Dataset>& subs, std::size_t i, std::size_t d) {
  Dataset out(d);
  std::size_t total = 0;
  for (std::size_t j = 0; j < subs.size(); ++j)
    if (j != i) total += subs[j].size();
  out.reserve(total);
  for (std::size_t j = 0; j < subs.size(); ++j)
    if (j != i) out.append(subs[j]);
  return out;
}

inline void require_agents(const std::vector<Dataset>& subs) {
  if (subs.size() < 2) throw Error(ErrorCode::InvalidParam, "a mechanism needs at least two submissions");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pooling and size-checked pooling
// ---------------------------------------------------------------------------

inline std::vector<Dataset> mech_pool(const std::vector<Dataset>& subs) {
  detail::require_agents(subs);
  std::size_t d = 1;
  for (const Dataset& s : subs)
    if (!s.empty()) d = s.dim();
  std::vector<Dataset> out;
  out.reserve(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) out.push_back(detail::others_union(subs, i, d));
  return out;
}

/// Others' data to agents that submitted at least sigma/sqrt(cm) points, nothing otherwise.
inline std::vector<Dataset> mech_size_check(const std::vector<Dataset>& subs, const ProblemParams& p) {
  detail::require_agents(subs);
  const std::size_t d = detail::submission_dim(subs, p);
  const double threshold = p.pooled_share();
  std::vector<Dataset> out;
  out.reserve(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (static_cast<double>(subs[i].size()) + kIntegralTolerance >= threshold) {
      out.push_back(detail::others_union(subs, i, d));
    } else {
      out.emplace_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corrupt-and-deploy
// ---------------------------------------------------------------------------

/// ceil(1 / (2 epsilon)).
inline int corrupt_deploy_k(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidParam, "epsilon must be positive");
  const double k = std::ceil(1.0 / (2.0 * epsilon) - 1e-12);
  if (k > 20) throw Error(ErrorCode::InvalidParam, "epsilon too small: corruption exponent exceeds 20");
  return std::max(1, static_cast<int>(k));
}

/**
 * Corruption scale beta^2 from the total number of submitted points. The
 * cost is the per-dimension cost c/d, so the scalar formula applies
 * coordinatewise.
 */
inline double corrupt_deploy_beta_sq(double total_points, const ProblemParams& p, int k) {
  const double m = p.agents;
  const double c = p.effective_cost();
  const double kd = k;
  return total_points * total_points * std::pow(m - 1.0, kd - 1.0) /
         (kd * static_cast<double>(double_factorial(2 * k - 1)) * std::pow(p.sigma, kd) *
          std::pow(c, (kd - 2.0) / 2.0) * std::pow(m, 1.5 * kd));
}

/// The same scale written around agent i's own count and n* for the others.
inline double corrupt_deploy_beta_sq_profile(double own_points, const ProblemParams& p, int k) {
  const double m = p.agents;
  const double n = p.pooled_share();
  const double kd = k;
  const double total = own_points + (m - 1.0) * n;
  return std::pow(n, kd - 2.0) * std::pow(m - 1.0, kd - 1.0) * total * total /
         (kd * static_cast<double>(double_factorial(2 * k - 1)) * std::pow(m, kd + 1.0) *
          std::pow(p.sigma, 2.0 * kd - 2.0));
}

/**
 * Agent i's view of corrupt-and-deploy: every other point, with noise of
 * variance beta^2 (mean(Y_i) - mean(others))^{2k} per coordinate.
 */
inline Allocation corrupt_deploy_for_agent(const std::vector<Dataset>& subs, std::size_t i, const ProblemParams& p,
                                           int k, Engine& eng) {
  detail::require_agents(subs);
  const std::size_t d = detail::submission_dim(subs, p);
  std::size_t total = 0;
  for (const Dataset& s : subs) {
    if (s.empty()) throw Error(ErrorCode::EmptySubmission, "corrupt-and-deploy needs every submission nonempty");
    total += s.size();
  }
  const double beta_sq = corrupt_deploy_beta_sq(static_cast<double>(total), p, k);

  Allocation out{Dataset(d), detail::others_union(subs, i, d), Vec(d)};
  const Vec own = subs[i].mean();
  const Vec rest = out.corrupted.mean();
  Vec sd(d);
  for (std::size_t q = 0; q < d; ++q) {
    out.eta_sq[q] = beta_sq * std::pow(own[q] - rest[q], 2 * k);
    sd[q] = std::sqrt(out.eta_sq[q]);
  }
  for (std::size_t r = 0; r < out.corrupted.size(); ++r) {
    auto pt = out.corrupted.point(r);
    for (std::size_t q = 0; q < d; ++q) pt[q] += sd[q] * standard_normal(eng);
  }
  return out;
}

/// Deployed estimates for every agent: mean of own submission and the corrupted rest.
inline std::vector<Vec> mech_corrupt_deploy(const std::vector<Dataset>& subs, const ProblemParams& p, double epsilon,
                                            StreamKey stream) {
  const int k = corrupt_deploy_k(epsilon);
  std::vector<Vec> out;
  out.reserve(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    Engine eng = stream.child(i).engine();
    Allocation a = corrupt_deploy_for_agent(subs, i, p, k, eng);
    Dataset all = subs[i];
    all.append(a.corrupted);
    out.push_back(all.mean());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-check and corrupt
// ---------------------------------------------------------------------------

/// Optional record of the mechanism's random choices for one agent.
struct CrossCheckTrace {
  std::vector<std::size_t> clean_indices;  // into the others' union
  std::vector<double> noise;               // row-major, one per corrupted coordinate
};

/**
 * Agent i's allocation. For m <= 4 the others' data is returned untouched.
 * Otherwise min(|others|, n*) points are drawn without replacement as the
 * clean set, the rest are corrupted with N(0, alpha^2 (mean(Y_i) -
 * mean(clean))^2) noise per coordinate. An empty Y_i gets an infinite
 * variance, and its corrupted points are NaN.
 */
inline Allocation cross_check_for_agent(const std::vector<Dataset>& subs, std::size_t i, const ProblemParams& p,
                                        double alpha, Engine& eng, CrossCheckTrace* trace = nullptr) {
  detail::require_agents(subs);
  const std::size_t d = detail::submission_dim(subs, p);
  Dataset others = detail::others_union(subs, i, d);
  if (p.agents <= 4) return {std::move(others), Dataset(d), Vec(d, 0.0)};

  const std::size_t total = others.size();
  const std::size_t n_clean = std::min<std::size_t>(total, static_cast<std::size_t>(p.n_star));

  // Partial Fisher-Yates: the first n_clean slots hold the clean sample.
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t r = 0; r < n_clean; ++r) std::swap(idx[r], idx[uniform_index(eng, r, total - 1)]);

  Allocation out{Dataset(d), Dataset(d), Vec(d, 0.0)};
  out.clean.reserve(n_clean);
  for (std::size_t r = 0; r < n_clean; ++r) out.clean.push_back(others.point(idx[r]));

  std::vector<char> is_clean(total, 0);
  for (std::size_t r = 0; r < n_clean; ++r) is_clean[idx[r]] = 1;
  out.corrupted.reserve(total - n_clean);
  for (std::size_t r = 0; r < total; ++r)
    if (!is_clean[r]) out.corrupted.push_back(others.point(r));

  if (subs[i].empty()) {
    out.eta_sq.assign(d, std::numeric_limits<double>::infinity());
  } else if (!out.clean.empty()) {
    const Vec own = subs[i].mean();
    const Vec check = out.clean.mean();
    for (std::size_t q = 0; q < d; ++q) out.eta_sq[q] = alpha * alpha * (own[q] - check[q]) * (own[q] - check[q]);
  }

  if (trace) {
    trace->clean_indices.assign(idx.begin(), idx.begin() + static_cast<long>(n_clean));
    trace->noise.clear();
  }
  for (std::size_t r = 0; r < out.corrupted.size(); ++r) {
    auto pt = out.corrupted.point(r);
    for (std::size_t q = 0; q < d; ++q) {
      double z = 0.0;
      if (std::isinf(out.eta_sq[q])) {
        z = std::numeric_limits<double>::quiet_NaN();
      } else {
        z = std::sqrt(out.eta_sq[q]) * standard_normal(eng);
      }
      if (trace) trace->noise.push_back(z);
      pt[q] += z;
    }
  }
  return out;
}

inline std::vector<Allocation> mech_cross_check_corrupt(const std::vector<Dataset>& subs, const ProblemParams& p,
                                                        double alpha, StreamKey stream) {
  std::vector<Allocation> out;
  out.reserve(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    Engine eng = stream.child(i).engine();
    out.push_back(cross_check_for_agent(subs, i, p, alpha, eng));
  }
  return out;
}

}  // namespace collab
