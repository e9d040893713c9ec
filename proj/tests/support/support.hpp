#pragma once

// Fixtures shared by the unit and acceptance tests.

#include <algorithm>
#include <cstddef>
#include <map>
#include <vector>

#include "cehhmm/hhmm_appendix.hpp"
#include "cehhmm/hhmm_policy.hpp"
#include "cehhmm/pomdp.hpp"
#include "cehhmm/rng.hpp"

namespace cehhmm::testing {

/// Random probability vector. With sparse set, roughly a third of the entries
/// are zero (never all of them).
std::vector<double> random_row(Rng& rng, std::size_t n, bool sparse = false);

enum class EvalKind { Terminal, Additive };

struct WorldShape {
  std::size_t states = 2;
  std::size_t actions = 2;
  std::size_t observations = 2;
};

/// Random tabular world. Quantized evaluation tables take values in
/// {0, 0.25, ..., 1} so that exact ties show up.
WorldModel random_world(Rng& rng, WorldShape shape, EvalKind kind, bool sparse = false,
                        bool quantized = false);

/// Shape with each cardinality uniform in [1, max] (states and actions >= 1).
WorldShape random_shape(Rng& rng, std::size_t max_states, std::size_t max_actions,
                        std::size_t max_observations);

/// Best expected value over every state-feedback policy x_1,
/// x_t = f_t(x_{t-1}, z_{t-1}), by plain enumeration. Terminal evaluations only.
/// Throws CapExceeded above `cap` policies.
double enumerate_state_feedback_policies(const WorldModel& world, std::size_t horizon,
                                         double cap = 2e4);

/// Best expected value over fixed action sequences (no feedback at all).
double best_open_loop_value(const WorldModel& world, std::size_t horizon);

/// Always plays the same action, no memory.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(Symbol action, std::size_t actions, std::size_t observations)
      : action_(action), actions_(actions), observations_(observations) {}
  std::size_t num_actions() const override { return actions_; }
  std::size_t num_observations() const override { return observations_; }
  std::vector<std::size_t> memory_cardinalities() const override { return {1}; }
  Symbol step(std::span<const Symbol>, std::optional<Symbol>, Rng&,
              std::span<Symbol> memory_out) const override {
    memory_out[0] = 0;
    return action_;
  }
  void for_each_outcome(std::span<const Symbol>, std::optional<Symbol>,
                        const OutcomeFn& fn) const override {
    const Symbol m = 0;
    fn(std::span<const Symbol>(&m, 1), action_, 1.0);
  }
  double log_prob(const Episode&) const override { return 0.0; }

 private:
  Symbol action_;
  std::size_t actions_;
  std::size_t observations_;
};

/// Random HhmmPolicy parameters (every row random, sentinel rows included).
PolicyParams random_params(Rng& rng, const HhmmStructure& structure, bool sparse = false);

/// Random HHMM spec with depth in [2, max_depth] and at most max_states
/// states per level. Every non-ending state can reach an ending state.
hhmm::Spec random_spec(Rng& rng, std::size_t max_depth, std::size_t max_states,
                       std::size_t max_outputs);

/// Pearson chi-square goodness of fit. Cells with expected count below 5 are
/// pooled; the probability not covered by `expected` forms one more cell.
/// Returns the upper-tail p-value.
template <class Key>
double chi_square_p_value(const std::map<Key, std::size_t>& observed,
                          const std::map<Key, double>& expected, std::size_t samples);

double chi_square_upper_tail(double statistic, double dof);

/// Pools (observed, expected-count) pairs and returns the p-value.
double chi_square_from_cells(std::vector<std::pair<double, double>> cells);

template <class Key>
double chi_square_p_value(const std::map<Key, std::size_t>& observed,
                          const std::map<Key, double>& expected, std::size_t samples) {
  std::vector<std::pair<double, double>> cells;
  double covered = 0.0;
  std::size_t matched = 0;
  for (const auto& [key, p] : expected) {
    covered += p;
    const auto it = observed.find(key);
    const double o = it == observed.end() ? 0.0 : static_cast<double>(it->second);
    if (it != observed.end()) matched += it->second;
    cells.emplace_back(o, p * static_cast<double>(samples));
  }
  const double rest_expected = std::max(0.0, 1.0 - covered) * static_cast<double>(samples);
  cells.emplace_back(static_cast<double>(samples - matched), rest_expected);
  return chi_square_from_cells(std::move(cells));
}

}  // namespace cehhmm::testing
