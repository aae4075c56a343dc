#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "collab/error.hpp"
#include "collab/rng.hpp"

namespace collab {

using Vec = std::vector<double>;

/// Largest distance from an integer tolerated for derived sample counts.
inline constexpr double kIntegralTolerance = 1e-9;

/**
 * Public market parameters: per-dimension standard deviation, cost per
 * sample, number of agents and data dimension. `n_star` is derived by
 * validate_params() and is zero on an unvalidated instance.
 */
struct ProblemParams {
  double sigma = 1.0;
  double cost = 1.0;
  int agents = 2;
  int dim = 1;
  long n_star = 0;

  /// Cost used by the scalar analysis when the data is d-dimensional.
  double effective_cost() const { return cost / dim; }

  /// sigma * sqrt(d / (c m)): the per-agent share that minimises social
  /// penalty. Equals n_star when m >= 5.
  double pooled_share() const { return sigma * std::sqrt(dim / (cost * agents)); }

  /// Recommended count for the cross-check mechanism as a real number.
  double n_star_real() const {
    return agents >= 5 ? pooled_share() : sigma * std::sqrt(static_cast<double>(dim) / cost) / agents;
  }

  friend bool operator==(const ProblemParams&, const ProblemParams&) = default;
};

namespace detail {

inline long checked_integer(double x, const char* what) {
  const double r = std::round(x);
  if (std::abs(x - r) > kIntegralTolerance) {
    throw Error(ErrorCode::NonIntegerNStar,
                std::string(what) + " = " + std::to_string(x) + " is not an integer; adjust the cost");
  }
  if (r < 1.0) {
    throw Error(ErrorCode::InvalidParam, std::string(what) + " rounds to zero");
  }
  return static_cast<long>(r);
}

}  // namespace detail

/// Checks the parameter invariants and attaches the integral n_star.
inline ProblemParams validate_params(ProblemParams p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw Error(ErrorCode::InvalidParam, "sigma must be positive");
  if (!(p.cost > 0.0) || !std::isfinite(p.cost)) throw Error(ErrorCode::InvalidParam, "cost must be positive");
  if (p.agents < 2) throw Error(ErrorCode::InvalidParam, "need at least two agents");
  if (p.dim < 1) throw Error(ErrorCode::InvalidParam, "dimension must be at least one");
  p.n_star = detail::checked_integer(p.n_star_real(), "n_star");
  return p;
}

inline ProblemParams make_params(double sigma, double cost, int agents, int dim = 1) {
  return validate_params(ProblemParams{sigma, cost, agents, dim, 0});
}

/// Integral pooled share, needed by the pooling, size-check and
/// corrupt-and-deploy mechanisms (which recommend sigma/sqrt(cm) for every m).
inline long pooled_share_count(const ProblemParams& p) {
  return detail::checked_integer(p.pooled_share(), "pooled share");
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Ordered collection of d-dimensional points stored row-major.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim) : dim_(dim) {}
  Dataset(std::size_t dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0 || values_.size() % dim_ != 0) {
      throw Error(ErrorCode::DimensionMismatch, "value count is not a multiple of the dimension");
    }
  }

  static Dataset scalars(std::initializer_list<double> xs) { return Dataset(1, std::vector<double>(xs)); }
  static Dataset scalars(std::vector<double> xs) { return Dataset(1, std::move(xs)); }

  static Dataset points(std::initializer_list<std::initializer_list<double>> pts) {
    if (pts.size() == 0) return Dataset(1);
    Dataset out(pts.begin()->size());
    for (const auto& pt : pts) out.push_back(std::span<const double>(pt.begin(), pt.size()));
    return out;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size() / dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> point(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> point(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> values() const { return values_; }

  void reserve(std::size_t n) { values_.reserve(n * dim_); }

  void push_back(std::span<const double> pt) {
    if (pt.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "point dimension differs from dataset");
    values_.insert(values_.end(), pt.begin(), pt.end());
  }

  void append(const Dataset& other) {
    if (other.empty()) return;
    if (other.dim_ != dim_) throw Error(ErrorCode::DimensionMismatch, "cannot append datasets of different dimension");
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  }

  Vec sum() const {
    Vec s(dim_, 0.0);
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = 0; k < dim_; ++k) s[k] += values_[i * dim_ + k];
    return s;
  }

  Vec mean() const {
    if (empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty dataset");
    Vec s = sum();
    for (double& v : s) v /= static_cast<double>(size());
    return s;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t dim_ = 1;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

enum class Family { Gaussian, UniformBox, ScaledRademacher };

/**
 * Data distribution with independent coordinates. `spread` is the standard
 * deviation (Gaussian), the half-width (UniformBox) or the jump size
 * (ScaledRademacher).
 */
struct DistributionSpec {
  Family family = Family::Gaussian;
  Vec mean{0.0};
  double spread = 1.0;

  std::size_t dim() const { return mean.size(); }

  double per_dim_variance() const {
    switch (family) {
      case Family::Gaussian: return spread * spread;
      case Family::UniformBox: return spread * spread / 3.0;
      case Family::ScaledRademacher: return spread * spread;
    }
    return 0.0;
  }

  DistributionSpec with_mean(Vec mu) const {
    DistributionSpec out = *this;
    out.mean = std::move(mu);
    return out;
  }
};

namespace detail {

inline DistributionSpec checked_spec(DistributionSpec spec, double sigma_bound) {
  if (spec.mean.empty()) throw Error(ErrorCode::InvalidDistribution, "mean must have at least one dimension");
  if (!(spec.spread >= 0.0)) throw Error(ErrorCode::InvalidDistribution, "spread must be nonnegative");
  if (spec.per_dim_variance() > sigma_bound * sigma_bound * (1.0 + 1e-12)) {
    throw Error(ErrorCode::InvalidDistribution, "per-dimension variance exceeds sigma^2");
  }
  return spec;
}

}  // namespace detail

inline DistributionSpec gaussian(Vec mean, double sigma) {
  return detail::checked_spec({Family::Gaussian, std::move(mean), sigma}, sigma);
}

/// Uniform on [mu - w, mu + w]^d; variance w^2/3 must not exceed sigma_bound^2.
inline DistributionSpec uniform_box(Vec mean, double half_width, double sigma_bound) {
  return detail::checked_spec({Family::UniformBox, std::move(mean), half_width}, sigma_bound);
}

inline DistributionSpec scaled_rademacher(Vec mean, double scale, double sigma_bound) {
  return detail::checked_spec({Family::ScaledRademacher, std::move(mean), scale}, sigma_bound);
}

inline Dataset sample_dataset(const DistributionSpec& spec, std::size_t n, Engine& eng) {
  const std::size_t d = spec.dim();
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double z = 0.0;
      switch (spec.family) {
        case Family::Gaussian: z = spec.spread * standard_normal(eng); break;
        case Family::UniformBox: z = uniform_real(eng, -spec.spread, spec.spread); break;
        case Family::ScaledRademacher: z = (eng() >> 63) ? spec.spread : -spec.spread; break;
      }
      values[i * d + k] = spec.mean[k] + z;
    }
  }
  return Dataset(d, std::move(values));
}

inline Dataset sample_dataset(const DistributionSpec& spec, std::size_t n, StreamKey stream) {
  Engine eng = stream.engine();
  return sample_dataset(spec, n, eng);
}

// ---------------------------------------------------------------------------
// Small kernels
// ---------------------------------------------------------------------------

/// k!! for odd k >= -1 (the empty product (-1)!! is 1).
inline std::int64_t double_factorial(std::int64_t k) {
  if (k < -1) throw Error(ErrorCode::InvalidParam, "double factorial needs k >= -1");
  if (k % 2 == 0) throw Error(ErrorCode::EvenInput, "double factorial is defined here for odd k only");
  std::int64_t out = 1;
  for (std::int64_t j = k; j > 1; j -= 2) {
    if (out > std::numeric_limits<std::int64_t>::max() / j) {
      throw Error(ErrorCode::InvalidParam, "double factorial overflows 64 bits");
    }
    out *= j;
  }
  return out;
}

/// E[(X - mu)^p] for X ~ N(mu, sigma^2).
inline double normal_central_moment(int p, double sigma) {
  if (p < 0) throw Error(ErrorCode::InvalidParam, "moment order must be nonnegative");
  if (p % 2 == 1) return 0.0;
  return std::pow(sigma, p) * static_cast<double>(double_factorial(p - 1));
}

}  // namespace collab
