#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "collab/allocation.hpp"
#include "collab/error.hpp"
#include "collab/params.hpp"
#include "collab/rng.hpp"

namespace collab {

// ---------------------------------------------------------------------------
// Submission rules: how an agent maps collected data to what she submits.
// ---------------------------------------------------------------------------

namespace submit {
struct Identity {};
struct Scale { double gamma; };
struct Shift { double delta; };
struct SubmitConstant { double value; };
/// Keep the first k points.
struct Subset { std::size_t k; };
/// Fit a per-dimension Gaussian to the collected data and submit n_fake
/// fresh draws from it.
struct FabricateFitGaussian { std::size_t n_fake; };
struct Empty {};
/// Multiply every point by (1 + sigma^2 / (n ell^2))^{-1}.
struct ShrinkEll { double ell; };
}  // namespace submit

using SubmissionRule = std::variant<submit::Identity, submit::Scale, submit::Shift, submit::SubmitConstant,
                                    submit::Subset, submit::FabricateFitGaussian, submit::Empty, submit::ShrinkEll>;

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

namespace est {
/// Unweighted mean of own data, clean and corrupted allocations.
struct PlainMeanAll {};
/// Inverse-variance weighting with the returned corruption variance.
struct RecommendedWeighted {};
/// Inverse-variance weighting with a fixed corruption variance tau^2.
struct FixedWeighted { double tau_sq; };
struct CleanOnlyMean {};
struct OwnDataOnlyMean {};
/// Posterior mean under a N(0, ell^2) prior on each coordinate.
struct PosteriorMean { double ell; };
/// Mean of the submission together with everything returned; this is what
/// the corrupt-and-deploy mechanism reports on the agent's behalf.
struct Deployed {};
}  // namespace est

using EstimatorChoice = std::variant<est::PlainMeanAll, est::RecommendedWeighted, est::FixedWeighted,
                                     est::CleanOnlyMean, est::OwnDataOnlyMean, est::PosteriorMean, est::Deployed>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline std::string describe(const SubmissionRule& rule) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](submit::Identity) { os << "identity"; },
                 [&](submit::Scale r) { os << "scale(" << r.gamma << ")"; },
                 [&](submit::Shift r) { os << "shift(" << r.delta << ")"; },
                 [&](submit::SubmitConstant r) { os << "constant(" << r.value << ")"; },
                 [&](submit::Subset r) { os << "subset(" << r.k << ")"; },
                 [&](submit::FabricateFitGaussian r) { os << "fabricate(" << r.n_fake << ")"; },
                 [&](submit::Empty) { os << "empty"; },
                 [&](submit::ShrinkEll r) { os << "shrink(" << r.ell << ")"; },
             },
             rule);
  return os.str();
}

inline std::string describe(const EstimatorChoice& choice) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](est::PlainMeanAll) { os << "plain-mean"; },
                 [&](est::RecommendedWeighted) { os << "weighted"; },
                 [&](est::FixedWeighted e) { os << "fixed-weighted(" << e.tau_sq << ")"; },
                 [&](est::CleanOnlyMean) { os << "clean-only"; },
                 [&](est::OwnDataOnlyMean) { os << "own-only"; },
                 [&](est::PosteriorMean e) { os << "posterior(" << e.ell << ")"; },
                 [&](est::Deployed) { os << "deployed"; },
             },
             choice);
  return os.str();
}

/// True when shifting the input by t shifts the submitted data by t.
inline bool is_translation_equivariant(const SubmissionRule& rule) {
  return !std::holds_alternative<submit::Scale>(rule) && !std::holds_alternative<submit::SubmitConstant>(rule) &&
         !std::holds_alternative<submit::ShrinkEll>(rule);
}

inline bool is_translation_equivariant(const EstimatorChoice& choice) {
  return !std::holds_alternative<est::PosteriorMean>(choice);
}

// ---------------------------------------------------------------------------

inline Dataset apply_submission(const SubmissionRule& rule, const Dataset& x, const ProblemParams& p, Engine& eng) {
  const std::size_t d = x.dim();
  const std::size_t n = x.size();
  auto transformed = [&](auto&& fn) {
    Dataset out = x;
    for (std::size_t i = 0; i < n; ++i)
      for (double& v : out.point(i)) v = fn(v);
    return out;
  };

  return std::visit(
      overloaded{
          [&](submit::Identity) { return x; },
          [&](submit::Scale r) { return transformed([g = r.gamma](double v) { return g * v; }); },
          [&](submit::Shift r) { return transformed([s = r.delta](double v) { return v + s; }); },
          [&](submit::SubmitConstant r) { return transformed([c = r.value](double) { return c; }); },
          [&](submit::Subset r) {
            if (r.k > n) throw Error(ErrorCode::SubsetTooLarge, "subset larger than the collected dataset");
            auto vals = x.values();
            return Dataset(d, std::vector<double>(vals.begin(), vals.begin() + static_cast<long>(r.k * d)));
          },
          [&](submit::FabricateFitGaussian r) {
            if (x.empty()) throw Error(ErrorCode::EmptyInput, "cannot fit a Gaussian to no data");
            const Vec mu = x.mean();
            Vec sd(d, p.sigma);
            if (n >= 2) {
              for (std::size_t k = 0; k < d; ++k) {
                double ss = 0.0;
                for (std::size_t i = 0; i < n; ++i) ss += (x.point(i)[k] - mu[k]) * (x.point(i)[k] - mu[k]);
                sd[k] = std::sqrt(ss / static_cast<double>(n - 1));
              }
            }
            std::vector<double> vals(r.n_fake * d);
            for (std::size_t i = 0; i < r.n_fake; ++i)
              for (std::size_t k = 0; k < d; ++k) vals[i * d + k] = mu[k] + sd[k] * standard_normal(eng);
            return Dataset(d, std::move(vals));
          },
          [&](submit::Empty) { return Dataset(d); },
          [&](submit::ShrinkEll r) {
            if (!(r.ell > 0.0)) throw Error(ErrorCode::InvalidParam, "ell must be positive");
            if (n == 0) return x;
            const double factor = 1.0 / (1.0 + p.sigma * p.sigma / (static_cast<double>(n) * r.ell * r.ell));
            return transformed([factor](double v) { return factor * v; });
          },
      },
      rule);
}

namespace detail {

inline std::size_t common_dim(std::initializer_list<const Dataset*> sets, std::size_t fallback) {
  std::size_t d = 0;
  for (const Dataset* s : sets) {
    if (s->empty()) continue;
    if (d == 0) d = s->dim();
    else if (s->dim() != d) throw Error(ErrorCode::DimensionMismatch, "datasets passed to an estimator differ in dimension");
  }
  return d == 0 ? fallback : d;
}

inline void add_sum(Vec& acc, const Dataset& s) {
  if (s.empty()) return;
  const Vec part = s.sum();
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += part[k];
}

inline Vec plain_mean(std::initializer_list<const Dataset*> sets, std::size_t d) {
  Vec acc(d, 0.0);
  std::size_t count = 0;
  for (const Dataset* s : sets) {
    add_sum(acc, *s);
    count += s->size();
  }
  if (count == 0) throw Error(ErrorCode::EmptyInput, "estimator has no data");
  for (double& v : acc) v /= static_cast<double>(count);
  return acc;
}

// Inverse-variance weighting: own and clean points get 1/sigma^2, corrupted
// points 1/(sigma^2 + noise_var[k]); `prior_precision` adds a N(0, .) prior.
inline Vec weighted_mean(const Dataset& x, const Dataset& clean, const Dataset& corrupted, double sigma,
                         const Vec& noise_var, double prior_precision, std::size_t d) {
  const double s2 = sigma * sigma;
  const double n_clean = static_cast<double>(x.size() + clean.size());
  const double n_cor = static_cast<double>(corrupted.size());
  Vec clean_sum(d, 0.0);
  add_sum(clean_sum, x);
  add_sum(clean_sum, clean);
  const Vec cor_sum = corrupted.empty() ? Vec(d, 0.0) : corrupted.sum();

  Vec out(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double nv = noise_var.empty() ? 0.0 : noise_var[k];
    const double w_cor = std::isinf(nv) ? 0.0 : 1.0 / (s2 + nv);
    double num = clean_sum[k] / s2;
    double den = n_clean / s2 + prior_precision;
    if (w_cor > 0.0 && n_cor > 0.0) {
      num += w_cor * cor_sum[k];
      den += w_cor * n_cor;
    }
    if (!(den > 0.0)) throw Error(ErrorCode::EmptyInput, "estimator has no usable data");
    out[k] = num / den;
  }
  return out;
}

}  // namespace detail

/**
 * Agent-side estimate of the mean from her collected data `x`, her
 * submission `y` and the mechanism's allocation.
 */
inline Vec estimate(const EstimatorChoice& choice, const Dataset& x, const Dataset& y, const Allocation& alloc,
                    double sigma) {
  const Dataset& d_clean = alloc.clean;
  const Dataset& d_cor = alloc.corrupted;
  const std::size_t d = detail::common_dim({&x, &y, &d_clean, &d_cor}, std::max<std::size_t>(1, alloc.eta_sq.size()));
  if (!alloc.eta_sq.empty() && alloc.eta_sq.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "corruption variance has the wrong dimension");
  }

  return std::visit(
      overloaded{
          [&](est::PlainMeanAll) { return detail::plain_mean({&x, &d_clean, &d_cor}, d); },
          [&](est::RecommendedWeighted) {
            return detail::weighted_mean(x, d_clean, d_cor, sigma, alloc.eta_sq, 0.0, d);
          },
          [&](est::FixedWeighted e) {
            if (!(e.tau_sq >= 0.0)) throw Error(ErrorCode::InvalidParam, "tau^2 must be nonnegative");
            return detail::weighted_mean(x, d_clean, d_cor, sigma, Vec(d, e.tau_sq), 0.0, d);
          },
          [&](est::CleanOnlyMean) { return detail::plain_mean({&x, &d_clean}, d); },
          [&](est::OwnDataOnlyMean) { return detail::plain_mean({&x}, d); },
          [&](est::PosteriorMean e) {
            if (!(e.ell > 0.0)) throw Error(ErrorCode::InvalidParam, "ell must be positive");
            return detail::weighted_mean(x, d_clean, d_cor, sigma, alloc.eta_sq, 1.0 / (e.ell * e.ell), d);
          },
          [&](est::Deployed) { return detail::plain_mean({&y, &d_clean, &d_cor}, d); },
      },
      choice);
}

}  // namespace collab
