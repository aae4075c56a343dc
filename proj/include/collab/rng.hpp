#pragma once

#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace collab {

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/**
 * SplitMix64 generator. Small state, so constructing one per
 * (replication, agent, purpose) triple is cheap.
 */
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Engine(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Role tags for the third level of the stream hierarchy.
enum class StreamRole : std::uint64_t {
  Data = 1,
  Submission = 2,
  Mechanism = 3,
  Sampling = 4,
};

/**
 * Node in a hierarchy of independent random streams.
 *
 * A master seed spawns children by index; each child key is a hash of the
 * parent key and the index, so the stream used for a given
 * (replication, agent, role) depends only on those indices and never on the
 * order in which work is scheduled.
 */
class StreamKey {
 public:
  constexpr explicit StreamKey(std::uint64_t master_seed)
      : key_(detail::mix64(master_seed ^ 0x5851f42d4c957f2dULL)) {}

  constexpr StreamKey child(std::uint64_t index) const {
    return StreamKey(Raw{}, detail::mix64(key_ ^ detail::mix64(index + detail::kGolden)));
  }
  constexpr StreamKey child(StreamRole role) const {
    return child(static_cast<std::uint64_t>(role) | (1ULL << 63));
  }

  constexpr Engine engine() const { return Engine(key_); }
  constexpr std::uint64_t value() const { return key_; }

  friend constexpr bool operator==(StreamKey a, StreamKey b) { return a.key_ == b.key_; }

 private:
  struct Raw {};
  constexpr StreamKey(Raw, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
};

inline double standard_normal(Engine& eng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

inline double uniform_real(Engine& eng, double lo, double hi) {
  boost::random::uniform_real_distribution<double> dist(lo, hi);
  return dist(eng);
}

inline std::size_t uniform_index(Engine& eng, std::size_t lo, std::size_t hi) {
  boost::random::uniform_int_distribution<std::size_t> dist(lo, hi);
  return dist(eng);
}

}  // namespace collab
