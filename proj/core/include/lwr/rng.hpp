#pragma once

#include <cstdint>
#include <random>

namespace lwr {

// Named sub-streams of a master seed. Values are part of the reproducibility
// contract: changing them changes every generated trajectory.
enum class StreamId : std::uint64_t {
  schedule_step = 1,
  schedule_window = 2,
  dynamics = 3,
  norm_property = 4,
  schedule = 5,
};

// Deterministic 64-bit seed for (master, stream, index). splitmix64 finaliser
// chained over the three words.
std::uint64_t derive_seed(std::uint64_t master, StreamId stream, std::uint64_t index,
                          std::uint64_t sub_index = 0) noexcept;

class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed) : engine_(seed) {}
  RngStream(std::uint64_t master, StreamId stream, std::uint64_t index = 0)
      : engine_(derive_seed(master, stream, index)) {}

  double normal(double mean, double stddev) { return mean + stddev * standard_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> standard_{0.0, 1.0};
};

}  // namespace lwr
