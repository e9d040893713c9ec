#include "cehhmm/ce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "cehhmm/parallel.hpp"

namespace cehhmm {

namespace {

class WorldPlay final : public BlackBoxPlay {
 public:
  WorldPlay(const World& world, std::size_t horizon)
      : world_(world), horizon_(horizon), acc_(world.evaluation().initial()) {}

  Symbol execute(Symbol action, Rng& rng) override {
    state_ = t_ == 0 ? world_.sample_initial(rng)
                     : world_.sample_transition(state_, previous_action_, rng);
    const Symbol y = world_.sample_observation(state_, rng);
    acc_ = world_.evaluation().step(acc_, StepContext{t_ + 1, horizon_, action, y, state_});
    previous_action_ = action;
    ++t_;
    return y;
  }

  double evaluate() const override { return acc_; }

 private:
  const World& world_;
  std::size_t horizon_;
  std::size_t t_ = 0;
  StateId state_ = 0;
  Symbol previous_action_ = 0;
  double acc_;
};

// target <- w * target + (1 - w) * previous, row by row.
void blend(PolicyParams& target, const PolicyParams& previous, double w) {
  for (std::size_t k = 0; k < target.tables().size(); ++k) {
    auto dst = target.tables()[k].data();
    auto src = previous.tables()[k].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = w * dst[i] + (1.0 - w) * src[i];
  }
}

void format_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

std::size_t CEConfig::elite_size() const {
  const double raw = selective_rate * static_cast<double>(samples_per_iteration);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

void CEConfig::validate() const {
  if (!(selective_rate > 0.0 && selective_rate < 1.0)) {
    throw ConfigError("selective rate must lie in (0, 1)");
  }
  if (samples_per_iteration < 2) throw ConfigError("need at least 2 samples per iteration");
  if (elite_size() < 1) throw ConfigError("elite set would be empty");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (convergence_patience == 0) throw ConfigError("patience must be at least 1");
  if (max_iterations == 0) throw ConfigError("max_iterations must be at least 1");
  if (!(smoothing >= 0.0)) throw ConfigError("smoothing must be nonnegative");
  if (!(step_size > 0.0 && step_size <= 1.0)) throw ConfigError("step size must lie in (0, 1]");
  if (evaluation_rollouts < 2) throw ConfigError("evaluation needs at least 2 rollouts");
}

std::unique_ptr<BlackBoxPlay> WorldBlackBox::begin(std::size_t horizon) const {
  return std::make_unique<WorldPlay>(world_, horizon);
}

Episode BlackBoxSource::generate(const Policy& policy, std::size_t horizon, Rng& rng) const {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (env_.num_actions() != policy.num_actions() ||
      env_.num_observations() != policy.num_observations()) {
    throw ConfigError("black box and policy disagree on action/observation cardinalities");
  }
  const std::size_t levels = policy.memory_cardinalities().size();
  Episode ep;
  ep.actions.resize(horizon);
  ep.observations.resize(horizon);
  ep.memory_levels = levels;
  ep.memories.resize(horizon * levels);
  auto play = env_.begin(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::span<const Symbol> prev_memory =
        t == 0 ? std::span<const Symbol>{} : std::span<const Symbol>(ep.memory(t - 1));
    std::optional<Symbol> prev_obs;
    if (t > 0) prev_obs = ep.observations[t - 1];
    ep.actions[t] = policy.step(prev_memory, prev_obs, rng, ep.memory(t));
    ep.observations[t] = play->execute(ep.actions[t], rng);
  }
  ep.score = play->evaluate();
  return ep;
}

std::vector<std::size_t> select_elite(std::span<const double> scores, double selective_rate) {
  if (scores.empty()) throw ConfigError("select_elite needs at least one score");
  if (!(selective_rate > 0.0 && selective_rate < 1.0)) {
    throw ConfigError("selective rate must lie in (0, 1)");
  }
  const double raw = selective_rate * static_cast<double>(scores.size());
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

ConvergenceTracker::ConvergenceTracker(std::size_t patience) : patience_(patience) {
  if (patience_ == 0) throw ConfigError("patience must be at least 1");
}

ConvergenceTracker::Status ConvergenceTracker::register_iteration(double elite_mean) {
  if (!has_best_ || elite_mean > best_ + kStrictness) {
    best_ = elite_mean;
    has_best_ = true;
    unsuccessful_ = 0;
    return Status::Improved;
  }
  ++unsuccessful_;
  return unsuccessful_ >= patience_ ? Status::Converged : Status::Unsuccessful;
}

std::string to_string(StopReason reason) {
  return reason == StopReason::Converged ? "converged" : "max_iterations";
}

ValueEstimate evaluate_policy(const EpisodeSource& source, const Policy& policy,
                              std::size_t horizon, std::size_t rollouts, std::uint64_t seed,
                              std::size_t threads) {
  if (rollouts < 2) throw ConfigError("evaluation needs at least 2 rollouts");
  std::vector<double> scores(rollouts);
  parallel_for(rollouts, threads, [&](std::size_t i) {
    Rng rng(seed, {stream::kEvaluation, i});
    scores[i] = source.generate(policy, horizon, rng).score;
  });
  return mean_and_standard_error(scores);
}

CEResult run_ce(const EpisodeSource& source, const HhmmStructure& structure,
                const CEConfig& config, const IterationCallback& on_iteration) {
  config.validate();
  structure.validate();
  if (source.num_actions() != structure.num_actions ||
      source.num_observations() != structure.num_observations) {
    throw ConfigError("episode source and policy structure disagree on cardinalities");
  }

  const std::size_t n = config.samples_per_iteration;
  HhmmPolicy policy(uniform_policy(structure));
  CEResult result{policy.params(), policy.params(), 0.0, 0.0, 0.0, {}, 0, StopReason::MaxIterations};
  ConvergenceTracker tracker(config.convergence_patience);
  std::vector<Episode> episodes(n);
  std::vector<double> scores(n);

  for (std::size_t iteration = 0; iteration < config.max_iterations; ++iteration) {
    parallel_for(n, config.threads, [&](std::size_t i) {
      Rng rng(config.seed, {stream::kTraining, iteration, i});
      episodes[i] = source.generate(policy, config.horizon, rng);
      scores[i] = episodes[i].score;
    });

    const auto elite = select_elite(scores, config.selective_rate);
    double elite_sum = 0.0;
    std::vector<const Episode*> selected;
    selected.reserve(elite.size());
    for (auto idx : elite) {
      elite_sum += scores[idx];
      selected.push_back(&episodes[idx]);
    }
    const double elite_mean = elite_sum / static_cast<double>(elite.size());
    const auto status = tracker.register_iteration(elite_mean);
    // Ties with the best elite mean count as the best too, so a search that
    // saturates keeps sharpening its answer.
    const bool best_so_far = elite_mean >= tracker.best() - ConvergenceTracker::kStrictness;
    if (status == ConvergenceTracker::Status::Improved) result.best_elite_mean = elite_mean;

    IterationRecord record{iteration + 1, scores[elite.back()], elite_mean, tracker.best(),
                           tracker.unsuccessful()};
    result.history.push_back(record);
    result.iterations_run = iteration + 1;
    if (on_iteration) on_iteration(record);

    PolicyParams refit = ml_update(structure, selected, config.smoothing, policy.params());
    if (config.step_size < 1.0) blend(refit, policy.params(), config.step_size);
    // The refit of the best elite set stands for that set.
    if (best_so_far) result.best_params = refit;
    policy = HhmmPolicy(std::move(refit));
    if (status == ConvergenceTracker::Status::Converged) {
      result.stop_reason = StopReason::Converged;
      break;
    }
  }
  result.final_params = policy.params();

  const auto estimate = evaluate_policy(source, HhmmPolicy(result.best_params), config.horizon,
                                        config.evaluation_rollouts, config.seed, config.threads);
  result.best_mean_score = estimate.mean;
  result.best_score_standard_error = estimate.standard_error;
  return result;
}

void write_history_csv(std::ostream& out, std::span<const IterationRecord> history) {
  out << "iteration,elite_threshold,elite_mean,best_so_far,unsuccessful\n";
  for (const auto& r : history) {
    out << r.iteration << ',';
    format_double(out, r.elite_threshold);
    out << ',';
    format_double(out, r.elite_mean);
    out << ',';
    format_double(out, r.best_so_far);
    out << ',' << r.unsuccessful << '\n';
  }
}

}  // namespace cehhmm
