#pragma once

// Cross-entropy policy search: sample N episodes from the current policy,
// keep the ceil(rho * N) best, refit the policy to them by maximum likelihood,
// repeat until the elite mean stops improving.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cehhmm/hhmm_policy.hpp"
#include "cehhmm/pomdp.hpp"

namespace cehhmm {

inline constexpr std::size_t kWeakPatience = 100;
inline constexpr std::size_t kStrongPatience = 500;

struct CEConfig {
  std::size_t samples_per_iteration = 1000;
  double selective_rate = 0.5;
  std::size_t horizon = 100;
  /// Successive unsuccessful iterations before stopping.
  std::size_t convergence_patience = kWeakPatience;
  std::size_t max_iterations = 100000;
  double smoothing = 0.0;
  /// Weight of the refit in params <- w * refit + (1 - w) * params; 1 keeps
  /// the pure refit.
  double step_size = 1.0;
  std::uint64_t seed = 1;
  /// Fresh rollouts used to score the returned policy.
  std::size_t evaluation_rollouts = 200;
  /// Sampling workers; does not affect results.
  std::size_t threads = 1;

  std::size_t elite_size() const;
  void validate() const;
};

/// Produces scored episodes for a policy. Implementations must be safe to
/// call concurrently with distinct streams.
class EpisodeSource {
 public:
  virtual ~EpisodeSource() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_observations() const = 0;
  virtual Episode generate(const Policy& policy, std::size_t horizon, Rng& rng) const = 0;
};

/// Samples from a generative world with sample_episode.
class GenerativeSource final : public EpisodeSource {
 public:
  explicit GenerativeSource(const World& world) : world_(world) {}
  std::size_t num_actions() const override { return world_.num_actions(); }
  std::size_t num_observations() const override { return world_.num_observations(); }
  Episode generate(const Policy& policy, std::size_t horizon, Rng& rng) const override {
    return sample_episode(world_, policy, horizon, rng);
  }

 private:
  const World& world_;
};

/// One play in an external world whose state is never exposed.
class BlackBoxPlay {
 public:
  virtual ~BlackBoxPlay() = default;
  /// Carries out x_t and returns the measurement y_t.
  virtual Symbol execute(Symbol action, Rng& rng) = 0;
  /// Evaluation of the whole play, available after the last step.
  virtual double evaluate() const = 0;
};

class BlackBoxEnvironment {
 public:
  virtual ~BlackBoxEnvironment() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_observations() const = 0;
  virtual std::unique_ptr<BlackBoxPlay> begin(std::size_t horizon) const = 0;
};

/// Wraps a generative world as a black box. Consumes random numbers in the
/// same order as sample_episode, so both sources agree stream for stream.
class WorldBlackBox final : public BlackBoxEnvironment {
 public:
  explicit WorldBlackBox(const World& world) : world_(world) {}
  std::size_t num_actions() const override { return world_.num_actions(); }
  std::size_t num_observations() const override { return world_.num_observations(); }
  std::unique_ptr<BlackBoxPlay> begin(std::size_t horizon) const override;

 private:
  const World& world_;
};

/// Episodes from a black box: x, y, m and the score, no states.
class BlackBoxSource final : public EpisodeSource {
 public:
  explicit BlackBoxSource(const BlackBoxEnvironment& env) : env_(env) {}
  std::size_t num_actions() const override { return env_.num_actions(); }
  std::size_t num_observations() const override { return env_.num_observations(); }
  Episode generate(const Policy& policy, std::size_t horizon, Rng& rng) const override;

 private:
  const BlackBoxEnvironment& env_;
};

/// Indices of the ceil(rho * N) largest scores, best first; ties go to the
/// smaller index. Throws ConfigError on empty input or rho outside (0,1).
std::vector<std::size_t> select_elite(std::span<const double> scores, double selective_rate);

/// Counts successive unsuccessful iterations.
class ConvergenceTracker {
 public:
  enum class Status { Improved, Unsuccessful, Converged };
  /// Improvement must exceed the best value by more than this.
  static constexpr double kStrictness = 1e-9;

  explicit ConvergenceTracker(std::size_t patience);

  Status register_iteration(double elite_mean);
  double best() const { return best_; }
  std::size_t unsuccessful() const { return unsuccessful_; }
  bool has_best() const { return has_best_; }

 private:
  std::size_t patience_;
  std::size_t unsuccessful_ = 0;
  double best_ = 0.0;
  bool has_best_ = false;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double elite_threshold = 0.0;
  double elite_mean = 0.0;
  double best_so_far = 0.0;
  std::size_t unsuccessful = 0;
};

enum class StopReason { Converged, MaxIterations };
std::string to_string(StopReason reason);

struct CEResult {
  /// Update fitted to the best elite set (the latest one on ties).
  PolicyParams best_params;
  /// Parameters after the last update.
  PolicyParams final_params;
  double best_elite_mean = 0.0;
  /// Mean and standard error of config.evaluation_rollouts fresh episodes
  /// under best_params.
  double best_mean_score = 0.0;
  double best_score_standard_error = 0.0;
  std::vector<IterationRecord> history;
  std::size_t iterations_run = 0;
  StopReason stop_reason = StopReason::MaxIterations;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Throws ConfigError on invalid config or a source/structure mismatch.
CEResult run_ce(const EpisodeSource& source, const HhmmStructure& structure,
                const CEConfig& config, const IterationCallback& on_iteration = {});

/// Fresh-rollout score of a policy through a source. Episode i uses
/// Rng(seed, {stream::kEvaluation, i}).
ValueEstimate evaluate_policy(const EpisodeSource& source, const Policy& policy,
                              std::size_t horizon, std::size_t rollouts, std::uint64_t seed,
                              std::size_t threads = 1);

/// iteration,elite_threshold,elite_mean,best_so_far,unsuccessful
void write_history_csv(std::ostream& out, std::span<const IterationRecord> history);

}  // namespace cehhmm
