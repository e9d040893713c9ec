#include "cehhmm/pomdp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cehhmm/parallel.hpp"

namespace cehhmm {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_rows(const std::vector<double>& data, std::size_t row_length, const char* what) {
  if (row_length == 0 || data.size() % row_length != 0) {
    throw ConfigError(std::string(what) + ": table size is not a multiple of the row length");
  }
  for (std::size_t r = 0; r < data.size() / row_length; ++r) {
    double sum = 0.0;
    for (std::size_t k = 0; k < row_length; ++k) {
      const double p = data[r * row_length + k];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(std::string(what) + " row " + std::to_string(r) +
                          ": probability outside [0,1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      throw ConfigError(std::string(what) + " row " + std::to_string(r) + " sums to " +
                        std::to_string(sum));
    }
  }
}

}  // namespace

// Evaluation -----------------------------------------------------------------

Evaluation Evaluation::terminal(std::size_t num_actions, std::size_t num_observations,
                                std::size_t num_states, std::vector<double> table) {
  return make_tabular(Kind::Terminal, num_actions, num_observations, num_states, std::move(table));
}

Evaluation Evaluation::additive(std::size_t num_actions, std::size_t num_observations,
                                std::size_t num_states, std::vector<double> table) {
  return make_tabular(Kind::Additive, num_actions, num_observations, num_states, std::move(table));
}

Evaluation Evaluation::recursive(StepFn fn, double initial) {
  if (!fn) throw ConfigError("recursive evaluation needs a step function");
  Evaluation e;
  e.kind_ = Kind::Recursive;
  e.fn_ = std::move(fn);
  e.initial_ = initial;
  return e;
}

Evaluation Evaluation::make_tabular(Kind kind, std::size_t a, std::size_t y, std::size_t z,
                                    std::vector<double> table) {
  if (table.size() != a * y * z) {
    throw ConfigError("evaluation table has " + std::to_string(table.size()) +
                      " entries, expected " + std::to_string(a * y * z));
  }
  for (double v : table) {
    if (!std::isfinite(v)) throw ConfigError("evaluation table holds a non-finite value");
  }
  Evaluation e;
  e.kind_ = kind;
  e.dims_[0] = a;
  e.dims_[1] = y;
  e.dims_[2] = z;
  e.table_ = std::move(table);
  return e;
}

double Evaluation::step(double acc, const StepContext& ctx) const {
  switch (kind_) {
    case Kind::Terminal:
      return ctx.t == ctx.horizon ? table_value(ctx.action, ctx.observation, ctx.state) : acc;
    case Kind::Additive:
      return acc + table_value(ctx.action, ctx.observation, ctx.state);
    case Kind::Recursive:
      break;
  }
  return fn_(acc, ctx);
}

double Evaluation::table_value(Symbol x, Symbol y, StateId z) const {
  if (!tabular()) throw ConfigError("evaluation is not tabular");
  return table_[(static_cast<std::size_t>(x) * dims_[1] + y) * dims_[2] + z];
}

double Evaluation::evaluate(std::span<const Symbol> actions, std::span<const Symbol> observations,
                            std::span<const StateId> states) const {
  const std::size_t horizon = actions.size();
  if (observations.size() != horizon || states.size() != horizon) {
    throw ConfigError("trajectory sequences differ in length");
  }
  double acc = initial_;
  for (std::size_t t = 0; t < horizon; ++t) {
    acc = step(acc, StepContext{t + 1, horizon, actions[t], observations[t], states[t]});
  }
  return acc;
}

// WorldModel -----------------------------------------------------------------

WorldModel::WorldModel(std::size_t num_states, std::size_t num_actions,
                       std::size_t num_observations, std::vector<double> initial,
                       std::vector<double> transition, std::vector<double> observation,
                       Evaluation evaluation)
    : num_states_(num_states),
      num_actions_(num_actions),
      num_observations_(num_observations),
      initial_(std::move(initial)),
      transition_(std::move(transition)),
      observation_(std::move(observation)),
      evaluation_(std::move(evaluation)) {
  if (num_states_ == 0 || num_actions_ == 0 || num_observations_ == 0) {
    throw ConfigError("world cardinalities must be positive");
  }
  if (initial_.size() != num_states_) throw ConfigError("initial law has wrong size");
  if (transition_.size() != num_states_ * num_actions_ * num_states_) {
    throw ConfigError("transition table has wrong size");
  }
  if (observation_.size() != num_states_ * num_observations_) {
    throw ConfigError("observation table has wrong size");
  }
  check_rows(initial_, num_states_, "initial");
  check_rows(transition_, num_states_, "transition");
  check_rows(observation_, num_observations_, "observation");
  if (evaluation_.tabular() &&
      (evaluation_.table_actions() != num_actions_ ||
       evaluation_.table_observations() != num_observations_ ||
       evaluation_.table_states() != num_states_)) {
    throw ConfigError("evaluation table shape does not match the world");
  }
}

std::span<const double> WorldModel::transition_row(StateId z_prev, Symbol x_prev) const {
  return {transition_.data() + (z_prev * num_actions_ + x_prev) * num_states_, num_states_};
}

std::span<const double> WorldModel::observation_row(StateId z) const {
  return {observation_.data() + z * num_observations_, num_observations_};
}

StateId WorldModel::sample_initial(Rng& rng) const { return rng.categorical(initial_); }

StateId WorldModel::sample_transition(StateId state, Symbol action, Rng& rng) const {
  return rng.categorical(transition_row(state, action));
}

Symbol WorldModel::sample_observation(StateId state, Rng& rng) const {
  return static_cast<Symbol>(rng.categorical(observation_row(state)));
}

// Sampling and values --------------------------------------------------------

Episode sample_episode(const World& world, const Policy& policy, std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (world.num_actions() != policy.num_actions() ||
      world.num_observations() != policy.num_observations()) {
    throw ConfigError("world and policy disagree on action/observation cardinalities");
  }
  const std::size_t levels = policy.memory_cardinalities().size();
  Episode ep;
  ep.actions.resize(horizon);
  ep.observations.resize(horizon);
  ep.states.emplace(horizon);
  ep.memory_levels = levels;
  ep.memories.resize(horizon * levels);

  const Evaluation& eval = world.evaluation();
  double acc = eval.initial();
  auto& states = *ep.states;
  for (std::size_t t = 0; t < horizon; ++t) {
    std::span<const Symbol> prev_memory =
        t == 0 ? std::span<const Symbol>{} : std::span<const Symbol>(ep.memory(t - 1));
    std::optional<Symbol> prev_obs;
    if (t > 0) prev_obs = ep.observations[t - 1];
    ep.actions[t] = policy.step(prev_memory, prev_obs, rng, ep.memory(t));
    states[t] = t == 0 ? world.sample_initial(rng)
                       : world.sample_transition(states[t - 1], ep.actions[t - 1], rng);
    ep.observations[t] = world.sample_observation(states[t], rng);
    acc = eval.step(acc, StepContext{t + 1, horizon, ep.actions[t], ep.observations[t], states[t]});
  }
  ep.score = acc;
  return ep;
}

double exact_policy_value(const WorldModel& world, const Policy& policy, std::size_t horizon,
                          double cap) {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (world.num_actions() != policy.num_actions() ||
      world.num_observations() != policy.num_observations()) {
    throw ConfigError("world and policy disagree on action/observation cardinalities");
  }
  double memory_states = 1.0;
  for (auto c : policy.memory_cardinalities()) memory_states *= static_cast<double>(c);
  const double branching = memory_states * static_cast<double>(world.num_actions()) *
                           static_cast<double>(world.num_states()) *
                           static_cast<double>(world.num_observations());
  const double terms = std::pow(branching, static_cast<double>(horizon));
  if (terms > cap) throw CapExceeded("exact_policy_value enumeration", terms, cap);

  const Evaluation& eval = world.evaluation();
  double total = 0.0;

  struct Walker {
    const WorldModel& world;
    const Policy& policy;
    const Evaluation& eval;
    std::size_t horizon;
    double& total;

    void visit(std::size_t t, StateId z_prev, Symbol x_prev, std::optional<Symbol> y_prev,
               const MemoryVector& memory_prev, double acc, double prob) {
      if (t == horizon) {
        total += prob * acc;
        return;
      }
      policy.for_each_outcome(memory_prev, y_prev,
                              [&](std::span<const Symbol> memory, Symbol x, double p_policy) {
                                const MemoryVector mem(memory.begin(), memory.end());
                                for (StateId z = 0; z < world.num_states(); ++z) {
                                  const double pz = t == 0 ? world.initial(z)
                                                           : world.transition(z_prev, x_prev, z);
                                  if (pz == 0.0) continue;
                                  for (Symbol y = 0; y < world.num_observations(); ++y) {
                                    const double py = world.observation(z, y);
                                    if (py == 0.0) continue;
                                    const double next_acc =
                                        eval.step(acc, StepContext{t + 1, horizon, x, y, z});
                                    visit(t + 1, z, x, y, mem, next_acc, prob * p_policy * pz * py);
                                  }
                                }
                              });
    }
  };

  Walker walker{world, policy, eval, horizon, total};
  walker.visit(0, 0, 0, std::nullopt, policy.reset(), eval.initial(), 1.0);
  return total;
}

ValueEstimate mean_and_standard_error(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw ConfigError("standard error needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(variance / static_cast<double>(n))};
}

ValueEstimate estimate_policy_value(const World& world, const Policy& policy, std::size_t horizon,
                                    std::size_t episodes, std::uint64_t seed, std::size_t threads) {
  if (episodes < 2) throw ConfigError("estimate_policy_value needs at least 2 episodes");
  std::vector<double> scores(episodes);
  parallel_for(episodes, threads, [&](std::size_t i) {
    Rng rng(seed, {stream::kEstimate, i});
    scores[i] = sample_episode(world, policy, horizon, rng).score;
  });
  return mean_and_standard_error(scores);
}

}  // namespace cehhmm
