#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "collab/alpha.hpp"
#include "collab/analytics.hpp"
#include "collab/estimators.hpp"
#include "collab/mechanisms.hpp"
#include "collab/params.hpp"
#include "collab/rng.hpp"

namespace collab {

enum class MechanismKind { Pool, SizeCheck, CorruptDeploy, CrossCheck };

inline std::string to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::Pool: return "pool";
    case MechanismKind::SizeCheck: return "size-check";
    case MechanismKind::CorruptDeploy: return "corrupt-deploy";
    case MechanismKind::CrossCheck: return "cross-check";
  }
  return "?";
}

struct Mechanism {
  MechanismKind kind = MechanismKind::CrossCheck;
  double epsilon = 0.5;  // corrupt-and-deploy only
};

/// (sample count, submission rule, estimator).
struct Strategy {
  long n = 0;
  SubmissionRule submission = submit::Identity{};
  EstimatorChoice estimator = est::RecommendedWeighted{};
  std::string label;
};

inline bool is_translation_equivariant(const Strategy& s) {
  return is_translation_equivariant(s.submission) && is_translation_equivariant(s.estimator);
}

struct Scenario {
  ProblemParams params;
  Mechanism mechanism;
  std::vector<Strategy> profile;  // one per agent
  DistributionSpec distribution;  // its mean is replaced by each mu in mu_grid
  long replications = 1000;
  std::vector<Vec> mu_grid;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  double alpha = 0.0;  // cross-check only; filled by make_scenario
};

struct MuCell {
  Vec mu;
  double mse = 0.0;
  double std_error = 0.0;
};

struct EmpiricalPenalty {
  double mean_sq_error = 0.0;
  double std_error = 0.0;
  double cost = 0.0;
  double total = 0.0;
  std::vector<MuCell> per_mu;
  /// True when the strategy is not translation-equivariant, so the max over
  /// the grid only bounds the supremum over all means from below.
  bool lower_bound_on_sup = false;
  double mean_eta_sq = 0.0;
  double eta_sq_std_error = 0.0;
};

// ---------------------------------------------------------------------------
// Recommended profiles
// ---------------------------------------------------------------------------

/// Sample count each mechanism recommends.
inline long recommended_count(const ProblemParams& p, const Mechanism& mech) {
  if (mech.kind == MechanismKind::CrossCheck) return p.n_star;
  return pooled_share_count(p);
}

inline Strategy recommended_strategy(const ProblemParams& p, const Mechanism& mech, double alpha) {
  Strategy s;
  s.n = recommended_count(p, mech);
  s.label = "recommended";
  switch (mech.kind) {
    case MechanismKind::Pool:
    case MechanismKind::SizeCheck: s.estimator = est::PlainMeanAll{}; break;
    case MechanismKind::CorruptDeploy: s.estimator = est::Deployed{}; break;
    case MechanismKind::CrossCheck:
      if (p.agents <= 4) s.estimator = est::PlainMeanAll{};
      else if (p.dim > 1) s.estimator = est::FixedWeighted{highdim_tau_sq(p, alpha)};
      else s.estimator = est::RecommendedWeighted{};
      break;
  }
  return s;
}

/// Scenario with every agent at the recommended strategy; solves alpha when needed.
inline Scenario make_scenario(const ProblemParams& p, Mechanism mech, DistributionSpec dist, long replications,
                              std::uint64_t seed, std::vector<Vec> mu_grid = {}) {
  Scenario sc;
  sc.params = p;
  sc.mechanism = mech;
  if (mech.kind == MechanismKind::CrossCheck && p.agents >= 5) sc.alpha = solve_alpha(p).alpha;
  sc.profile.assign(static_cast<std::size_t>(p.agents), recommended_strategy(p, mech, sc.alpha));
  if (dist.dim() != static_cast<std::size_t>(p.dim)) {
    throw Error(ErrorCode::DimensionMismatch, "distribution dimension differs from the market dimension");
  }
  sc.distribution = std::move(dist);
  sc.replications = replications;
  sc.mu_grid = mu_grid.empty() ? std::vector<Vec>{Vec(static_cast<std::size_t>(p.dim), 0.0)} : std::move(mu_grid);
  sc.master_seed = seed;
  return sc;
}

/// {0, +-5 sigma, +-50 sigma} along every coordinate.
inline std::vector<Vec> default_mu_grid(const ProblemParams& p) {
  std::vector<Vec> out;
  for (double k : {0.0, 5.0, -5.0, 50.0, -50.0}) out.emplace_back(static_cast<std::size_t>(p.dim), k * p.sigma);
  return out;
}

// ---------------------------------------------------------------------------
// One round
// ---------------------------------------------------------------------------

struct RoundOutcome {
  double sq_error = 0.0;
  double eta_sq = 0.0;
};

/**
 * Plays replication `rep` at mean `mu`, with `focal` using `focal_strategy`
 * and everyone else following the scenario profile. Only the focal agent's
 * allocation is computed. Streams depend on (seed, rep, agent, role) alone,
 * so every menu entry and every mu sees the same underlying noise.
 */
inline RoundOutcome play_round(const Scenario& sc, const Strategy& focal_strategy, std::size_t focal, const Vec& mu,
                               std::uint64_t rep) {
  const ProblemParams& p = sc.params;
  const std::size_t m = static_cast<std::size_t>(p.agents);
  const StreamKey key = StreamKey(sc.master_seed).child(rep);
  const DistributionSpec spec = sc.distribution.with_mean(mu);

  std::vector<Dataset> subs(m);
  Dataset own;
  for (std::size_t j = 0; j < m; ++j) {
    const Strategy& s = j == focal ? focal_strategy : sc.profile[j];
    const StreamKey agent = key.child(j);
    Dataset x = sample_dataset(spec, static_cast<std::size_t>(std::max(0L, s.n)), agent.child(StreamRole::Data));
    Engine sub_eng = agent.child(StreamRole::Submission).engine();
    subs[j] = apply_submission(s.submission, x, p, sub_eng);
    if (j == focal) own = std::move(x);
  }

  const std::size_t d = static_cast<std::size_t>(p.dim);
  Engine mech_eng = key.child(focal).child(StreamRole::Mechanism).engine();
  Allocation alloc;
  switch (sc.mechanism.kind) {
    case MechanismKind::Pool:
      alloc = {detail::others_union(subs, focal, d), Dataset(d), {}};
      break;
    case MechanismKind::SizeCheck: {
      const bool enough = static_cast<double>(subs[focal].size()) + kIntegralTolerance >= p.pooled_share();
      alloc = {enough ? detail::others_union(subs, focal, d) : Dataset(d), Dataset(d), {}};
      break;
    }
    case MechanismKind::CorruptDeploy:
      alloc = corrupt_deploy_for_agent(subs, focal, p, corrupt_deploy_k(sc.mechanism.epsilon), mech_eng);
      break;
    case MechanismKind::CrossCheck:
      alloc = cross_check_for_agent(subs, focal, p, sc.alpha, mech_eng);
      break;
  }

  RoundOutcome out;
  out.eta_sq = alloc.eta_sq.empty() ? 0.0 : alloc.eta_sq[0];
  Vec est;
  try {
    est = estimate(focal_strategy.estimator, own, subs[focal], alloc, p.sigma);
  } catch (const Error& e) {
    // No data at all: the maximum risk is unbounded.
    if (e.code() != ErrorCode::EmptyInput) throw;
    out.sq_error = std::numeric_limits<double>::infinity();
    return out;
  }
  double err = 0.0;
  for (std::size_t q = 0; q < d; ++q) err += (est[q] - mu[q]) * (est[q] - mu[q]);
  out.sq_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
  return out;
}

// ---------------------------------------------------------------------------
// Replications
// ---------------------------------------------------------------------------

/// Pairwise summation; the result depends only on the order of `xs`.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 64) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct SampleMoments {
  double mean = 0.0;
  double std_error = 0.0;
};

inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments out;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  out.mean = pairwise_sum(xs) / n;
  if (!std::isfinite(out.mean)) {
    out.std_error = std::numeric_limits<double>::infinity();
    return out;
  }
  if (xs.size() < 2) return out;
  std::vector<double> dev(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = (xs[i] - out.mean) * (xs[i] - out.mean);
  out.std_error = std::sqrt(pairwise_sum(dev) / (n - 1.0) / n);
  return out;
}

/// Runs fn(i) for i in [0, n) over `threads` workers with a static partition.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t lo = n * t / threads;
        const std::size_t hi = n * (t + 1) / threads;
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/**
 * Empirical penalty of `strategy` for agent `focal`. Translation-equivariant
 * strategies are evaluated at the first grid mean only; others at every
 * grid mean, keeping the worst.
 */
inline EmpiricalPenalty run_strategy(const Scenario& sc, const Strategy& strategy, std::size_t focal = 0) {
  if (sc.replications < 1) throw Error(ErrorCode::InvalidParam, "need at least one replication");
  if (sc.mu_grid.empty()) throw Error(ErrorCode::InvalidParam, "mu grid is empty");
  if (focal >= sc.profile.size()) throw Error(ErrorCode::InvalidParam, "focal agent out of range");

  const bool equivariant = is_translation_equivariant(strategy);
  const std::size_t cells = equivariant ? 1 : sc.mu_grid.size();
  const std::size_t n = static_cast<std::size_t>(sc.replications);

  EmpiricalPenalty out;
  out.lower_bound_on_sup = !equivariant;
  out.cost = sc.params.cost * static_cast<double>(strategy.n);
  std::vector<double> err(n);
  std::vector<double> eta(n);
  std::size_t worst = 0;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const Vec& mu = sc.mu_grid[cell];
    parallel_for(n, sc.threads, [&](std::size_t r) {
      const RoundOutcome o = play_round(sc, strategy, focal, mu, r);
      err[r] = o.sq_error;
      eta[r] = o.eta_sq;
    });
    const SampleMoments mom = sample_moments(err);
    out.per_mu.push_back({mu, mom.mean, mom.std_error});
    if (cell == 0) {
      const SampleMoments em = sample_moments(eta);
      out.mean_eta_sq = em.mean;
      out.eta_sq_std_error = em.std_error;
    }
    if (mom.mean > out.per_mu[worst].mse) worst = cell;
  }
  out.mean_sq_error = out.per_mu[worst].mse;
  out.std_error = out.per_mu[worst].std_error;
  out.total = out.mean_sq_error + out.cost;
  return out;
}

inline EmpiricalPenalty run_replications(const Scenario& sc, std::size_t focal = 0) {
  return run_strategy(sc, sc.profile.at(focal), focal);
}

/**
 * Mean and standard error of the per-replication difference in squared
 * error, a minus b, at the first grid mean. Both strategies see the same
 * draws, so this is far tighter than comparing two independent means.
 */
inline SampleMoments paired_sq_error_difference(const Scenario& sc, const Strategy& a, const Strategy& b,
                                                std::size_t focal = 0) {
  const std::size_t n = static_cast<std::size_t>(sc.replications);
  std::vector<double> diff(n);
  parallel_for(n, sc.threads, [&](std::size_t r) {
    diff[r] = play_round(sc, a, focal, sc.mu_grid.at(0), r).sq_error -
              play_round(sc, b, focal, sc.mu_grid.at(0), r).sq_error;
  });
  return sample_moments(diff);
}

// ---------------------------------------------------------------------------
// Deviation sweeps
// ---------------------------------------------------------------------------

/// Unilateral deviations for agent 0 from the recommended strategy.
inline std::vector<Strategy> default_menu(const ProblemParams& p, const Mechanism& mech, double alpha,
                                          bool include_fabrication = true) {
  const Strategy rec = recommended_strategy(p, mech, alpha);
  const long ns = rec.n;
  auto with = [&](std::string label, long n, SubmissionRule rule, EstimatorChoice choice) {
    return Strategy{n, std::move(rule), std::move(choice), std::move(label)};
  };
  std::vector<Strategy> menu;
  menu.push_back(with("n=0", 0, submit::Identity{}, rec.estimator));
  menu.push_back(with("n=n*/2", ns / 2, submit::Identity{}, rec.estimator));
  menu.push_back(with("n=2n*", 2 * ns, submit::Identity{}, rec.estimator));
  menu.push_back(with("scale(0.5)", ns, submit::Scale{0.5}, rec.estimator));
  menu.push_back(with("shift(1)", ns, submit::Shift{1.0}, rec.estimator));
  menu.push_back(with("constant(0)", ns, submit::SubmitConstant{0.0}, rec.estimator));
  menu.push_back(with("subset(n*/2)", ns, submit::Subset{static_cast<std::size_t>(ns / 2)}, rec.estimator));
  menu.push_back(with("empty", ns, submit::Empty{}, rec.estimator));
  if (include_fabrication) {
    menu.push_back(with("fabricate(n*) from 1", 1, submit::FabricateFitGaussian{static_cast<std::size_t>(ns)},
                        rec.estimator));
  }
  menu.push_back(with("estimator=plain-mean", ns, submit::Identity{}, est::PlainMeanAll{}));
  menu.push_back(with("estimator=clean-only", ns, submit::Identity{}, est::CleanOnlyMean{}));
  return menu;
}

/// Size-check deviations limited to collecting fewer or more points and withholding some.
inline std::vector<Strategy> size_check_restricted_menu(const ProblemParams& p) {
  const Strategy rec = recommended_strategy(p, {MechanismKind::SizeCheck}, 0.0);
  const long ns = rec.n;
  std::vector<Strategy> menu;
  menu.push_back({ns / 2, submit::Identity{}, rec.estimator, "n=n*/2"});
  menu.push_back({2 * ns, submit::Identity{}, rec.estimator, "n=2n*"});
  menu.push_back({ns, submit::Subset{static_cast<std::size_t>(ns / 2)}, rec.estimator, "subset(n*/2)"});
  return menu;
}

/// Collect one point, submit n* fabricated ones, keep everything returned.
inline Strategy fabrication_exploit(const ProblemParams& p) {
  const long ns = pooled_share_count(p);
  return {1, submit::FabricateFitGaussian{static_cast<std::size_t>(ns)}, est::PlainMeanAll{}, "fabricate(n*) from 1"};
}

struct SweepRow {
  Strategy strategy;
  std::optional<EmpiricalPenalty> penalty;  // empty when the mechanism rejects the strategy
  std::optional<double> closed_form;
  double combined_se = 0.0;
  bool profitable = false;  // beats the baseline by more than 3 combined SE
  std::string note;
};

struct SweepResult {
  EmpiricalPenalty baseline;
  std::optional<double> baseline_closed_form;
  std::vector<SweepRow> rows;
  bool any_profitable = false;
};

inline constexpr double kSigmaRule = 3.0;

/// Closed-form penalty for a pure sample-count deviation, when one exists.
inline std::optional<double> closed_form_for(const Scenario& sc, const Strategy& s) {
  const ProblemParams& p = sc.params;
  const bool plain = std::holds_alternative<submit::Identity>(s.submission);
  if (!plain || s.n <= 0) return std::nullopt;
  const Strategy rec = recommended_strategy(p, sc.mechanism, sc.alpha);
  if (rec.estimator.index() != s.estimator.index()) return std::nullopt;
  switch (sc.mechanism.kind) {
    case MechanismKind::CrossCheck:
      if (p.agents >= 5 && p.dim == 1) return penalty_closed_form(static_cast<double>(s.n), p, sc.alpha);
      if (p.agents <= 4 && s.n == rec.n) return penalty_smallm(p);
      return std::nullopt;
    case MechanismKind::SizeCheck: return size_check_penalty(static_cast<double>(s.n), p);
    case MechanismKind::Pool:
      return p.sigma * p.sigma * p.dim / (static_cast<double>(s.n) + (p.agents - 1.0) * rec.n) +
             p.cost * static_cast<double>(s.n);
    case MechanismKind::CorruptDeploy:
      if (s.n == rec.n) return mechpk_penalty(p, sc.mechanism.epsilon);
      return std::nullopt;
  }
  return std::nullopt;
}

inline SweepResult nash_deviation_sweep(const Scenario& sc, const std::vector<Strategy>& menu, std::size_t focal = 0) {
  SweepResult out;
  out.baseline = run_replications(sc, focal);
  out.baseline_closed_form = closed_form_for(sc, sc.profile.at(focal));
  for (const Strategy& s : menu) {
    SweepRow row;
    row.strategy = s;
    try {
      row.penalty = run_strategy(sc, s, focal);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySubmission) throw;
      row.note = "not admissible: " + std::string(e.what());
      out.rows.push_back(std::move(row));
      continue;
    }
    row.closed_form = closed_form_for(sc, s);
    row.combined_se = std::hypot(out.baseline.std_error, row.penalty->std_error);
    row.profitable = row.penalty->total < out.baseline.total - kSigmaRule * row.combined_se;
    if (row.penalty->lower_bound_on_sup) row.note = "lower bound on sup-risk";
    out.any_profitable = out.any_profitable || row.profitable;
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Individual rationality and the high-dimensional check
// ---------------------------------------------------------------------------

struct IrResult {
  double participating = 0.0;
  double std_error = 0.0;
  double standalone = 0.0;
  bool ok = false;
};

inline IrResult ir_check(const Scenario& sc, std::size_t focal = 0) {
  const EmpiricalPenalty e = run_replications(sc, focal);
  IrResult out;
  out.participating = e.total;
  out.std_error = e.std_error;
  out.standalone = baseline_penalties(sc.params).p_min_ir;
  out.ok = out.participating < out.standalone;
  return out;
}

/// Deviations used for the high-dimensional approximate-equilibrium check.
inline std::vector<Strategy> highdim_menu(const ProblemParams& p, double alpha) {
  const Strategy rec = recommended_strategy(p, {MechanismKind::CrossCheck}, alpha);
  const long ns = rec.n;
  std::vector<Strategy> menu;
  menu.push_back({ns / 2, submit::Identity{}, rec.estimator, "n=n*/2"});
  menu.push_back({2 * ns, submit::Identity{}, rec.estimator, "n=2n*"});
  menu.push_back({ns, submit::Subset{static_cast<std::size_t>(ns / 2)}, rec.estimator, "subset(n*/2)"});
  menu.push_back({ns, submit::Empty{}, rec.estimator, "empty"});
  menu.push_back({ns, submit::Identity{}, est::RecommendedWeighted{}, "estimator=weighted"});
  menu.push_back({ns, submit::Identity{}, est::CleanOnlyMean{}, "estimator=clean-only"});
  return menu;
}

struct HighDimResult {
  SweepResult sweep;
  double ratio = 0.0;      // baseline / best deviation
  double ratio_se = 0.0;   // delta-method standard error of the ratio
  double bound = 0.0;      // 1 + 5/m
  double pos_proxy = 0.0;  // m * penalty / (2 sigma sqrt(c m d))
  double pos_bound = 0.0;  // 2 + 10/m
  bool ok = false;
};

inline HighDimResult highdim_nic_check(const Scenario& sc, const std::vector<Strategy>& menu) {
  if (sc.params.agents < 5) throw Error(ErrorCode::InvalidParam, "the high-dimensional check needs m >= 5");
  HighDimResult out;
  out.sweep = nash_deviation_sweep(sc, menu);
  const EmpiricalPenalty& base = out.sweep.baseline;
  const EmpiricalPenalty* best = nullptr;
  for (const SweepRow& row : out.sweep.rows)
    if (row.penalty && (!best || row.penalty->total < best->total)) best = &*row.penalty;
  if (!best) throw Error(ErrorCode::InvalidParam, "menu produced no admissible deviation");

  const ProblemParams& p = sc.params;
  const double m = p.agents;
  out.ratio = base.total / best->total;
  out.ratio_se = out.ratio * std::hypot(base.std_error / base.total, best->std_error / best->total);
  out.bound = 1.0 + 5.0 / m;
  out.pos_proxy = m * base.total / (2.0 * p.sigma * std::sqrt(p.cost * m * p.dim));
  out.pos_bound = 2.0 + 10.0 / m;
  out.ok = out.ratio <= out.bound + kSigmaRule * out.ratio_se && out.pos_proxy < out.pos_bound;
  return out;
}

}  // namespace collab
