#include "cehhmm/hhmm_policy.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cehhmm {

namespace {

struct TableLayout {
  std::string name;
  Axis first;
  Axis second;
  std::size_t outcomes;
};

const Axis kNoAxis{"none", 1, false};

std::string level_name(std::size_t level) { return "m" + std::to_string(level); }

std::vector<TableLayout> table_layouts(const HhmmStructure& s) {
  s.validate();
  const std::size_t levels = s.num_levels();
  const auto& card = s.level_cardinalities;
  std::vector<TableLayout> out;
  out.push_back({"h0", Axis{level_name(1), card[0], false}, kNoAxis, s.num_actions});
  out.push_back({"h1", Axis{"y_prev", s.num_observations, true},
                 levels >= 2 ? Axis{level_name(2), card[1], false} : kNoAxis, card[0]});
  for (std::size_t l = 2; l <= levels; ++l) {
    out.push_back({"h" + std::to_string(l), Axis{level_name(l - 1) + "_prev", card[l - 2], true},
                   l < levels ? Axis{level_name(l + 1), card[l], false} : kNoAxis, card[l - 1]});
  }
  return out;
}

// Row of table `level` (1..L) at step index t, given the step's memory
// vector (already filled for levels above `level`) and the previous step.
inline std::size_t level_row(const ConditionalTable& table, std::size_t level, std::size_t levels,
                             std::span<const Symbol> memory, std::span<const Symbol> previous_memory,
                             std::optional<Symbol> previous_observation) {
  std::size_t a;
  if (level == 1) {
    a = previous_observation ? *previous_observation + 1 : 0;
  } else {
    a = previous_memory.empty() ? 0 : previous_memory[level - 2] + 1;
  }
  const std::size_t b = level < levels ? memory[level] : 0;
  return table.row_index(a, b);
}

void check_previous(const HhmmStructure& s, std::span<const Symbol> previous_memory,
                    std::optional<Symbol> previous_observation) {
  if (!previous_memory.empty()) {
    if (previous_memory.size() != s.num_levels()) {
      throw ConfigError("previous memory has " + std::to_string(previous_memory.size()) +
                        " levels, policy has " + std::to_string(s.num_levels()));
    }
    for (std::size_t l = 0; l < previous_memory.size(); ++l) {
      if (previous_memory[l] >= s.level_cardinalities[l]) {
        throw ConfigError("memory level " + std::to_string(l + 1) + " symbol out of range");
      }
    }
  }
  if (previous_observation && *previous_observation >= s.num_observations) {
    throw ConfigError("observation symbol out of range");
  }
}

void check_episode(const HhmmStructure& s, const Episode& ep) {
  const std::size_t horizon = ep.horizon();
  if (ep.memory_levels != s.num_levels() || ep.memories.size() != horizon * s.num_levels()) {
    throw ConfigError("episode memories missing or shaped for another structure");
  }
  if (ep.observations.size() != horizon) throw ConfigError("episode sequences differ in length");
  for (std::size_t t = 0; t < horizon; ++t) {
    if (ep.actions[t] >= s.num_actions) throw ConfigError("episode action out of range");
    if (ep.observations[t] >= s.num_observations) {
      throw ConfigError("episode observation out of range");
    }
    auto m = ep.memory(t);
    for (std::size_t l = 0; l < m.size(); ++l) {
      if (m[l] >= s.level_cardinalities[l]) throw ConfigError("episode memory out of range");
    }
  }
}

}  // namespace

void HhmmStructure::validate() const {
  if (level_cardinalities.empty()) throw ConfigError("an HHMM needs at least one level");
  for (auto c : level_cardinalities) {
    if (c == 0) throw ConfigError("level cardinalities must be >= 1");
  }
  if (num_actions == 0 || num_observations == 0) {
    throw ConfigError("action and observation cardinalities must be >= 1");
  }
}

ConditionalTable::ConditionalTable(std::string name, Axis first, Axis second, std::size_t outcomes)
    : name_(std::move(name)),
      first_(std::move(first)),
      second_(std::move(second)),
      outcomes_(outcomes),
      data_(rows() * outcomes, outcomes ? 1.0 / static_cast<double>(outcomes) : 0.0) {
  if (outcomes_ == 0) throw ConfigError("table " + name_ + " has no outcomes");
}

bool ConditionalTable::is_sentinel_row(std::size_t index) const {
  const std::size_t a = index / second_.size();
  const std::size_t b = index % second_.size();
  return (first_.start_sentinel && a == 0) || (second_.start_sentinel && b == 0);
}

std::size_t ConditionalTable::free_parameters() const {
  return (outcomes_ - 1) * first_.cardinality * second_.cardinality;
}

PolicyParams::PolicyParams(HhmmStructure structure) : structure_(std::move(structure)) {
  for (auto& layout : table_layouts(structure_)) {
    tables_.emplace_back(std::move(layout.name), std::move(layout.first), std::move(layout.second),
                         layout.outcomes);
  }
}

void PolicyParams::validate(double tolerance) const {
  for (const auto& table : tables_) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
      double sum = 0.0;
      for (double p : table.row(r)) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw ConfigError("table " + table.name() + " row " + std::to_string(r) +
                            ": probability outside [0,1]");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw ConfigError("table " + table.name() + " row " + std::to_string(r) + " sums to " +
                          std::to_string(sum));
      }
    }
  }
}

PolicyParams uniform_policy(const HhmmStructure& structure) { return PolicyParams(structure); }

std::size_t param_count(const HhmmStructure& structure) {
  std::size_t total = 0;
  for (const auto& layout : table_layouts(structure)) {
    total += (layout.outcomes - 1) * layout.first.cardinality * layout.second.cardinality;
  }
  return total;
}

Symbol policy_step(const PolicyParams& params, std::span<const Symbol> previous_memory,
                   std::optional<Symbol> previous_observation, Rng& rng,
                   std::span<Symbol> memory_out) {
  const auto& s = params.structure();
  const std::size_t levels = s.num_levels();
  check_previous(s, previous_memory, previous_observation);
  if (memory_out.size() != levels) throw ConfigError("memory output has the wrong size");
  for (std::size_t l = levels; l >= 1; --l) {
    const auto& table = params.level_table(l);
    const std::size_t r =
        level_row(table, l, levels, memory_out, previous_memory, previous_observation);
    memory_out[l - 1] = static_cast<Symbol>(rng.categorical(table.row(r)));
  }
  return static_cast<Symbol>(rng.categorical(params.action_table().row(memory_out[0], 0)));
}

double policy_log_prob(const PolicyParams& params, const Episode& episode, std::size_t begin,
                       std::size_t end) {
  const auto& s = params.structure();
  check_episode(s, episode);
  if (begin > end || end > episode.horizon()) throw ConfigError("log-prob range out of bounds");
  const std::size_t levels = s.num_levels();
  double total = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    auto memory = episode.memory(t);
    std::span<const Symbol> previous = t == 0 ? std::span<const Symbol>{} : episode.memory(t - 1);
    std::optional<Symbol> previous_obs;
    if (t > 0) previous_obs = episode.observations[t - 1];
    for (std::size_t l = levels; l >= 1; --l) {
      const auto& table = params.level_table(l);
      const double p = table.row(level_row(table, l, levels, memory, previous, previous_obs))[memory[l - 1]];
      if (p == 0.0) return -std::numeric_limits<double>::infinity();
      total += std::log(p);
    }
    const double p = params.action_table().row(memory[0], 0)[episode.actions[t]];
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
  }
  return total;
}

double policy_log_prob(const PolicyParams& params, const Episode& episode) {
  return policy_log_prob(params, episode, 0, episode.horizon());
}

PolicyParams ml_update(const HhmmStructure& structure, std::span<const Episode* const> selected,
                       double smoothing, const PolicyParams& fallback) {
  if (selected.empty()) throw ConfigError("ml_update needs at least one selected episode");
  if (!(smoothing >= 0.0)) throw ConfigError("smoothing must be nonnegative");
  if (fallback.structure() != structure) throw ConfigError("fallback has another structure");
  const std::size_t levels = structure.num_levels();

  // Counts live in a params-shaped object so that table layouts line up.
  PolicyParams counts(structure);
  for (auto& table : counts.tables()) std::fill(table.data().begin(), table.data().end(), 0.0);

  for (const Episode* ep : selected) {
    check_episode(structure, *ep);
    for (std::size_t t = 0; t < ep->horizon(); ++t) {
      auto memory = ep->memory(t);
      std::span<const Symbol> previous = t == 0 ? std::span<const Symbol>{} : ep->memory(t - 1);
      std::optional<Symbol> previous_obs;
      if (t > 0) previous_obs = ep->observations[t - 1];
      for (std::size_t l = 1; l <= levels; ++l) {
        auto& table = counts.level_table(l);
        table.row(level_row(table, l, levels, memory, previous, previous_obs))[memory[l - 1]] += 1.0;
      }
      counts.action_table().row(memory[0], 0)[ep->actions[t]] += 1.0;
    }
  }

  PolicyParams out(structure);
  for (std::size_t k = 0; k < out.tables().size(); ++k) {
    auto& dst = out.tables()[k];
    const auto& cnt = counts.tables()[k];
    const auto& old = fallback.tables()[k];
    const double outcomes = static_cast<double>(dst.outcomes());
    for (std::size_t r = 0; r < dst.rows(); ++r) {
      auto c = cnt.row(r);
      double total = 0.0;
      for (double v : c) total += v;
      auto row = dst.row(r);
      if (total == 0.0 && smoothing == 0.0) {
        auto src = old.row(r);
        std::copy(src.begin(), src.end(), row.begin());
        continue;
      }
      const double denom = total + smoothing * outcomes;
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = (c[i] + smoothing) / denom;
    }
  }
  return out;
}

PolicyParams ml_update(const HhmmStructure& structure, std::span<const Episode> selected,
                       double smoothing, const PolicyParams& fallback) {
  std::vector<const Episode*> ptrs;
  ptrs.reserve(selected.size());
  for (const auto& ep : selected) ptrs.push_back(&ep);
  return ml_update(structure, ptrs, smoothing, fallback);
}

void HhmmPolicy::for_each_outcome(std::span<const Symbol> previous_memory,
                                  std::optional<Symbol> previous_observation,
                                  const OutcomeFn& fn) const {
  const auto& s = params_.structure();
  check_previous(s, previous_memory, previous_observation);
  const std::size_t levels = s.num_levels();
  MemoryVector memory(levels, 0);

  auto descend = [&](auto& self, std::size_t level, double prob) -> void {
    if (level == 0) {
      auto row = params_.action_table().row(memory[0], 0);
      for (Symbol x = 0; x < row.size(); ++x) {
        if (row[x] > 0.0) fn(memory, x, prob * row[x]);
      }
      return;
    }
    const auto& table = params_.level_table(level);
    auto row = table.row(level_row(table, level, levels, memory, previous_memory, previous_observation));
    for (Symbol m = 0; m < row.size(); ++m) {
      if (row[m] == 0.0) continue;
      memory[level - 1] = m;
      self(self, level - 1, prob * row[m]);
    }
  };
  descend(descend, levels, 1.0);
}

}  // namespace cehhmm
