#pragma once

// Uncontrolled hierarchical HMM with Delta levels. Level 1 is the output
// alphabet; each level d = 2..Delta holds a state set Q_d, an ending set E_d,
// a production law prod_d(child | state) and a transit law
// trans_d(next | state) on the non-ending states. The root starts from
// `initial`.
//
// Call/return semantics: a level in a non-ending state produces a child (an
// output symbol when d = 2, otherwise a sub-process started in that state),
// waits for the child to reach its ending set, then transits. Entering an
// ending state returns control to the parent; at the root it ends the run.
// Ending states never produce.
//
// The same process is also available as a two-dimensional network of state
// cells and ended-flags, stepped column by column.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cehhmm/rng.hpp"
#include "cehhmm/types.hpp"

namespace cehhmm::hhmm {

struct Level {
  std::size_t num_states = 0;
  std::vector<bool> ending;
  /// num_states rows over the child alphabet; rows of ending states are unused.
  std::vector<std::vector<double>> prod;
  /// num_states rows over Q_d; rows of ending states are unused.
  std::vector<std::vector<double>> trans;

  bool is_ending(Symbol q) const { return ending.at(q); }
};

struct Spec {
  std::size_t num_outputs = 0;
  /// levels[0] is level 2, levels.back() is the root.
  std::vector<Level> levels;
  /// Root start law over Q_Delta.
  std::vector<double> initial;

  std::size_t depth() const { return levels.size() + 1; }
  /// d in 2..depth().
  const Level& level(std::size_t d) const { return levels.at(d - 2); }
  std::size_t child_count(std::size_t d) const {
    return d == 2 ? num_outputs : level(d - 1).num_states;
  }

  /// Throws ConfigError on bad shapes, rows off by more than 1e-12, a
  /// production with mass on an ending child state, or a root start with mass
  /// on an ending state.
  void validate() const;
};

using SequenceDistribution = std::map<std::vector<Symbol>, double>;

struct SampleResult {
  std::vector<Symbol> outputs;
  bool truncated = false;
};

/// Runs the call/return interpreter; stops with truncated = true once
/// max_outputs symbols have been emitted without the root ending.
SampleResult sample_recursive(const Spec& spec, Rng& rng, std::size_t max_outputs);

inline constexpr double kEnumerationCap = 1e7;

/// Exact law of complete runs with at most max_len outputs, from the
/// call/return semantics. The total is P(run ends within max_len outputs).
/// Throws CapExceeded when more than cap branches are explored.
SequenceDistribution enumerate_sequences(const Spec& spec, std::size_t max_len,
                                         double cap = kEnumerationCap);

enum class Flag : unsigned char { Unspecified, False, True };

struct Cell {
  Symbol state = 0;
  /// TRUE once this level's transit has landed in its ending set.
  Flag ended = Flag::Unspecified;
  /// Result of this level's transit in this column, if it ran.
  std::optional<Symbol> transit;

  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

/// One time slice: a cell per level (cells[0] is level 2) and the output.
struct Column {
  std::vector<Cell> cells;
  Symbol output = 0;

  bool resolved() const;
  bool operator==(const Column&) const = default;
  auto operator<=>(const Column&) const = default;
};

struct ColumnChoice {
  Column column;
  double probability = 0.0;
};

/// Law of the first column (flags unspecified).
std::vector<ColumnChoice> bn_initial(const Spec& spec);

struct Successor {
  /// The input column with every flag and transit filled in.
  Column resolved;
  /// Next column, or nothing when the root has ended.
  std::optional<Column> next;
  double probability = 0.0;
};

/// Exact successor law of an unresolved column. Flags resolve bottom-up (a
/// level above a FALSE flag copies FALSE, otherwise it transits); states of the
/// next column resolve top-down (id, transit or production). Throws
/// ConfigError naming the configuration when no rule applies.
std::vector<Successor> bn_successors(const Spec& spec, const Column& column);

/// Samples one successor.
Successor bn_step(const Spec& spec, const Column& column, Rng& rng);

/// Same law as enumerate_sequences, computed by expanding bn_successors.
SequenceDistribution bn_enumerate_sequences(const Spec& spec, std::size_t max_len,
                                            double cap = kEnumerationCap);

/// Spec document (schema "cehhmm.hhmm/1", JSON).
inline constexpr std::string_view kSpecSchema = "cehhmm.hhmm/1";
Spec parse_spec(std::string_view document);
std::string spec_to_text(const Spec& spec);
Spec load_spec(const std::filesystem::path& path);

}  // namespace cehhmm::hhmm
