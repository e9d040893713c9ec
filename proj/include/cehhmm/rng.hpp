#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>

namespace cehhmm {

/// Seeded random stream.
///
/// Each stream is a std::mt19937_64 whose state is initialized through
/// std::seed_seq from the 32-bit halves of (seed, stream ids...). Both the
/// engine and seed_seq are fully specified by the standard, so a stream is a
/// pure function of its (seed, ids) key on every conforming platform. Parallel
/// samplers derive one stream per work item, e.g. Rng(seed, {iteration, n}),
/// which makes results independent of scheduling.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Draws an index from a probability vector. Rounding slack at the top end
  /// resolves to the last index with positive mass.
  std::size_t categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
};

/// Stream tags used to keep training, evaluation and rollout streams apart.
namespace stream {
inline constexpr std::uint64_t kTraining = 1;
inline constexpr std::uint64_t kEvaluation = 2;
inline constexpr std::uint64_t kRollout = 3;
inline constexpr std::uint64_t kEstimate = 4;
}  // namespace stream

}  // namespace cehhmm
