#pragma once

// Controlled hierarchical HMM policy family.
//
// A policy with L memory levels factorizes, at every step t, as
//
//   h0(x_t | m1_t) * h1(m1_t | y_{t-1}, m2_t) * prod_{l=2..L} hl(ml_t | m(l-1)_{t-1}, m(l+1)_t)
//
// where m(L+1) is the empty symbol. Sampling within a step therefore runs top
// down: mL, m(L-1), ..., m1 and finally x. Lagged conditioning axes
// (y_{t-1} and m(l-1)_{t-1}) carry a start-sentinel column at index 0 that is
// used at t = 1; real symbols sit at index s + 1 on those axes.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cehhmm/pomdp.hpp"
#include "cehhmm/rng.hpp"

namespace cehhmm {

struct HhmmStructure {
  /// card(M^l) for l = 1..L.
  std::vector<std::size_t> level_cardinalities;
  std::size_t num_actions = 0;
  std::size_t num_observations = 0;

  std::size_t num_levels() const { return level_cardinalities.size(); }
  /// Throws ConfigError unless L >= 1 and every cardinality is >= 1.
  void validate() const;
  bool operator==(const HhmmStructure&) const = default;
};

/// Conditioning axis of a table.
struct Axis {
  std::string name;
  std::size_t cardinality = 1;
  /// Index 0 is reserved for the start sentinel.
  bool start_sentinel = false;

  std::size_t size() const { return cardinality + (start_sentinel ? 1 : 0); }
  bool operator==(const Axis&) const = default;
};

/// Conditional probability table over `outcomes`, rows indexed by two axes.
class ConditionalTable {
 public:
  ConditionalTable(std::string name, Axis first, Axis second, std::size_t outcomes);

  const std::string& name() const { return name_; }
  const Axis& first_axis() const { return first_; }
  const Axis& second_axis() const { return second_; }
  std::size_t outcomes() const { return outcomes_; }
  std::size_t rows() const { return first_.size() * second_.size(); }

  std::size_t row_index(std::size_t a, std::size_t b) const { return a * second_.size() + b; }
  std::span<double> row(std::size_t index) { return {data_.data() + index * outcomes_, outcomes_}; }
  std::span<const double> row(std::size_t index) const {
    return {data_.data() + index * outcomes_, outcomes_};
  }
  std::span<double> row(std::size_t a, std::size_t b) { return row(row_index(a, b)); }
  std::span<const double> row(std::size_t a, std::size_t b) const { return row(row_index(a, b)); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// Whether a row is conditioned on a start sentinel on either axis.
  bool is_sentinel_row(std::size_t index) const;
  /// (outcomes - 1) per row, over rows without a start sentinel.
  std::size_t free_parameters() const;

  bool operator==(const ConditionalTable&) const = default;

 private:
  std::string name_;
  Axis first_;
  Axis second_;
  std::size_t outcomes_;
  std::vector<double> data_;
};

/// Every table of a controlled HHMM: tables()[0] is h0 (action law) and
/// tables()[l] is hl for l = 1..L. Construction yields the flat (uniform) law.
class PolicyParams {
 public:
  explicit PolicyParams(HhmmStructure structure);

  const HhmmStructure& structure() const { return structure_; }
  std::size_t num_levels() const { return structure_.num_levels(); }

  ConditionalTable& action_table() { return tables_[0]; }
  const ConditionalTable& action_table() const { return tables_[0]; }
  /// level in 1..L.
  ConditionalTable& level_table(std::size_t level) { return tables_.at(level); }
  const ConditionalTable& level_table(std::size_t level) const { return tables_.at(level); }
  std::span<ConditionalTable> tables() { return tables_; }
  std::span<const ConditionalTable> tables() const { return tables_; }

  /// Throws ConfigError naming the table and row of the first row outside
  /// [0,1] or not summing to 1 within tolerance.
  void validate(double tolerance = 1e-12) const;

  bool operator==(const PolicyParams&) const = default;

 private:
  HhmmStructure structure_;
  std::vector<ConditionalTable> tables_;
};

PolicyParams uniform_policy(const HhmmStructure& structure);

/// Free parameters, matching the usual count: the start-sentinel rows exist in
/// storage but are left out; the empty upper axis of the top level counts as
/// one column.
std::size_t param_count(const HhmmStructure& structure);

/// One sampling step. An empty previous_memory or a missing observation is the
/// start sentinel. Writes memory_out (size L) and returns x_t.
Symbol policy_step(const PolicyParams& params, std::span<const Symbol> previous_memory,
                   std::optional<Symbol> previous_observation, Rng& rng,
                   std::span<Symbol> memory_out);

/// ln h(x, m | y) summed over steps [begin, end) (0-based). The memory at
/// begin - 1 is read from the episode. Throws ConfigError when the episode
/// carries no memories or a symbol is out of range.
double policy_log_prob(const PolicyParams& params, const Episode& episode, std::size_t begin,
                       std::size_t end);
double policy_log_prob(const PolicyParams& params, const Episode& episode);

/// Maximum-likelihood refit on the selected episodes:
///   row = (count + smoothing) / (row total + smoothing * outcomes).
/// With smoothing 0, rows that were never visited are copied from fallback.
/// Throws ConfigError on an empty selection or nonconforming episodes.
PolicyParams ml_update(const HhmmStructure& structure, std::span<const Episode* const> selected,
                       double smoothing, const PolicyParams& fallback);
PolicyParams ml_update(const HhmmStructure& structure, std::span<const Episode> selected,
                       double smoothing, const PolicyParams& fallback);

/// Policy adaptor so a parameter set can drive sample_episode and the exact
/// evaluators.
class HhmmPolicy final : public Policy {
 public:
  explicit HhmmPolicy(PolicyParams params) : params_(std::move(params)) {}

  const PolicyParams& params() const { return params_; }

  std::size_t num_actions() const override { return params_.structure().num_actions; }
  std::size_t num_observations() const override { return params_.structure().num_observations; }
  std::vector<std::size_t> memory_cardinalities() const override {
    return params_.structure().level_cardinalities;
  }
  Symbol step(std::span<const Symbol> previous_memory, std::optional<Symbol> previous_observation,
              Rng& rng, std::span<Symbol> memory_out) const override {
    return policy_step(params_, previous_memory, previous_observation, rng, memory_out);
  }
  void for_each_outcome(std::span<const Symbol> previous_memory,
                        std::optional<Symbol> previous_observation,
                        const OutcomeFn& fn) const override;
  double log_prob(const Episode& episode) const override {
    return policy_log_prob(params_, episode);
  }

 private:
  PolicyParams params_;
};

}  // namespace cehhmm
