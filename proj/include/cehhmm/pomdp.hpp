#pragma once

// Finite-horizon POMDP data model: worlds, trajectory evaluations, episodes,
// the stochastic-policy interface, episode sampling and policy values.
//
// Time runs t = 1..T. The hidden state z_t is drawn from p(z_t | z_{t-1},
// x_{t-1}) (the initial law at t = 1), the observation y_t from p(y_t | z_t),
// and the policy chooses x_t from its memory and y_{t-1}. Quantities with a
// subscript before 1 are the start sentinel.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cehhmm/rng.hpp"
#include "cehhmm/types.hpp"

namespace cehhmm {

/// Arguments of one evaluation step (t is 1-based).
struct StepContext {
  std::size_t t;
  std::size_t horizon;
  Symbol action;
  Symbol observation;
  StateId state;
};

/// Evaluation V(x_{1:T}, y_{1:T}, z_{1:T}) in recursive form: an accumulator
/// starting from initial() is folded through step() once per time step, and
/// the final accumulator is the trajectory's value.
///
/// Terminal and additive evaluations are tabular over (x, y, z) and reduce to
/// the same accumulator; only they can be stored in world files and consumed
/// by the dynamic-programming oracles.
class Evaluation {
 public:
  enum class Kind { Terminal, Additive, Recursive };
  using StepFn = std::function<double(double acc, const StepContext&)>;

  /// V = table(x_T, y_T, z_T). table is indexed [x][y][z], row-major.
  static Evaluation terminal(std::size_t num_actions, std::size_t num_observations,
                             std::size_t num_states, std::vector<double> table);
  /// V = sum_t table(x_t, y_t, z_t).
  static Evaluation additive(std::size_t num_actions, std::size_t num_observations,
                             std::size_t num_states, std::vector<double> table);
  static Evaluation recursive(StepFn fn, double initial = 0.0);

  Kind kind() const { return kind_; }
  bool tabular() const { return kind_ != Kind::Recursive; }
  double initial() const { return initial_; }
  double step(double acc, const StepContext& ctx) const;

  /// Tabular entry; throws ConfigError on recursive evaluations.
  double table_value(Symbol x, Symbol y, StateId z) const;
  std::span<const double> table() const { return table_; }
  std::size_t table_actions() const { return dims_[0]; }
  std::size_t table_observations() const { return dims_[1]; }
  std::size_t table_states() const { return dims_[2]; }

  double evaluate(std::span<const Symbol> actions, std::span<const Symbol> observations,
                  std::span<const StateId> states) const;

 private:
  static Evaluation make_tabular(Kind kind, std::size_t a, std::size_t y, std::size_t z,
                                 std::vector<double> table);

  Kind kind_ = Kind::Recursive;
  double initial_ = 0.0;
  StepFn fn_;
  std::size_t dims_[3] = {0, 0, 0};
  std::vector<double> table_;
};

/// Generative POMDP: anything that can sample initial states, transitions and
/// observations, and evaluate trajectories.
class World {
 public:
  virtual ~World() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_observations() const = 0;
  virtual StateId sample_initial(Rng& rng) const = 0;
  virtual StateId sample_transition(StateId state, Symbol action, Rng& rng) const = 0;
  virtual Symbol sample_observation(StateId state, Rng& rng) const = 0;
  virtual const Evaluation& evaluation() const = 0;
};

/// Tabular POMDP with explicit probability tables.
class WorldModel final : public World {
 public:
  /// transition is indexed [z_prev][x_prev][z], observation [z][y].
  /// Throws ConfigError unless every row lies in [0,1] and sums to 1 within
  /// 1e-12.
  WorldModel(std::size_t num_states, std::size_t num_actions, std::size_t num_observations,
             std::vector<double> initial, std::vector<double> transition,
             std::vector<double> observation, Evaluation evaluation);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const override { return num_actions_; }
  std::size_t num_observations() const override { return num_observations_; }

  double initial(StateId z) const { return initial_[z]; }
  double transition(StateId z_prev, Symbol x_prev, StateId z) const {
    return transition_[(z_prev * num_actions_ + x_prev) * num_states_ + z];
  }
  double observation(StateId z, Symbol y) const { return observation_[z * num_observations_ + y]; }

  std::span<const double> initial_row() const { return initial_; }
  std::span<const double> transition_row(StateId z_prev, Symbol x_prev) const;
  std::span<const double> observation_row(StateId z) const;

  StateId sample_initial(Rng& rng) const override;
  StateId sample_transition(StateId state, Symbol action, Rng& rng) const override;
  Symbol sample_observation(StateId state, Rng& rng) const override;
  const Evaluation& evaluation() const override { return evaluation_; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t num_observations_;
  std::vector<double> initial_;
  std::vector<double> transition_;
  std::vector<double> observation_;
  Evaluation evaluation_;
};

using MemoryVector = std::vector<Symbol>;

/// One sampled trajectory. memories is stored flat, horizon() rows of
/// memory_levels symbols each.
struct Episode {
  std::vector<Symbol> actions;
  std::vector<Symbol> observations;
  std::optional<std::vector<StateId>> states;
  std::size_t memory_levels = 0;
  std::vector<Symbol> memories;
  double score = 0.0;

  std::size_t horizon() const { return actions.size(); }
  /// Memory vector at 0-based step index.
  std::span<const Symbol> memory(std::size_t index) const {
    return {memories.data() + index * memory_levels, memory_levels};
  }
  std::span<Symbol> memory(std::size_t index) {
    return {memories.data() + index * memory_levels, memory_levels};
  }
};

/// Stochastic finite-memory policy. An empty memory span and a missing
/// observation both stand for the start sentinel.
class Policy {
 public:
  using OutcomeFn = std::function<void(std::span<const Symbol> memory, Symbol action, double prob)>;

  virtual ~Policy() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_observations() const = 0;
  virtual std::vector<std::size_t> memory_cardinalities() const = 0;

  /// Memory before the first step: the start sentinel.
  MemoryVector reset() const { return {}; }

  /// Samples (memory_t, x_t) given memory_{t-1} and y_{t-1}. Writes the new
  /// memory into memory_out (size = number of levels) and returns the action.
  virtual Symbol step(std::span<const Symbol> previous_memory,
                      std::optional<Symbol> previous_observation, Rng& rng,
                      std::span<Symbol> memory_out) const = 0;

  /// Enumerates every (memory_t, x_t) pair with positive probability.
  virtual void for_each_outcome(std::span<const Symbol> previous_memory,
                                std::optional<Symbol> previous_observation,
                                const OutcomeFn& fn) const = 0;

  /// ln h(x_{1:T}, m_{1:T} | y_{1:T}); -inf when a factor is zero.
  virtual double log_prob(const Episode& episode) const = 0;
};

/// Samples one episode by alternating policy steps and world steps.
/// Throws ConfigError on cardinality mismatch or horizon 0.
Episode sample_episode(const World& world, const Policy& policy, std::size_t horizon, Rng& rng);

inline constexpr double kDefaultEnumerationCap = 1e7;

/// Exact expected evaluation by enumerating every (memory, action, state,
/// observation) trajectory. Throws CapExceeded when the term count
/// (total memory states * |X| * |Z| * |Y|)^T is above cap.
double exact_policy_value(const WorldModel& world, const Policy& policy, std::size_t horizon,
                          double cap = kDefaultEnumerationCap);

struct ValueEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo value over `episodes` independent rollouts. Episode i uses the
/// stream Rng(seed, {stream::kEstimate, i}); reduction happens in index order,
/// so the result does not depend on `threads`.
ValueEstimate estimate_policy_value(const World& world, const Policy& policy, std::size_t horizon,
                                    std::size_t episodes, std::uint64_t seed,
                                    std::size_t threads = 1);

/// Mean and standard error of a sample (size >= 2).
ValueEstimate mean_and_standard_error(std::span<const double> values);

}  // namespace cehhmm
