#include "cehhmm/hhmm_appendix.hpp"

#include <cmath>
#include <functional>

#include "cehhmm/world_io.hpp"
#include "json.hpp"

namespace cehhmm::hhmm {

using nlohmann::json;

namespace {

constexpr double kRowTolerance = 1e-12;

void check_row(const std::vector<double>& row, std::size_t size, const std::string& where) {
  if (row.size() != size) {
    throw ConfigError(where + ": expected " + std::to_string(size) + " entries");
  }
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(where + ": probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    throw ConfigError(where + " sums to " + std::to_string(sum));
  }
}

class BranchCounter {
 public:
  explicit BranchCounter(double cap) : cap_(cap) {}
  void tick() {
    if (++count_ > cap_) throw CapExceeded("HHMM sequence enumeration", count_, cap_);
  }

 private:
  double cap_;
  double count_ = 0.0;
};

// Call/return enumeration in continuation-passing style: `then` receives the
// output prefix and probability once the level being run has ended.
class RecursiveEnumerator {
 public:
  using Continue = std::function<void(std::vector<Symbol>&, double)>;

  RecursiveEnumerator(const Spec& spec, std::size_t max_len, double cap)
      : spec_(spec), max_len_(max_len), counter_(cap) {}

  SequenceDistribution run() {
    const std::size_t root = spec_.depth();
    std::vector<Symbol> out;
    Continue record = [this](std::vector<Symbol>& seq, double p) { result_[seq] += p; };
    for (Symbol q = 0; q < spec_.initial.size(); ++q) {
      if (spec_.initial[q] > 0.0) produce(root, q, out, spec_.initial[q], record);
    }
    return std::move(result_);
  }

 private:
  void produce(std::size_t d, Symbol q, std::vector<Symbol>& out, double p, const Continue& then) {
    counter_.tick();
    const auto& row = spec_.level(d).prod[q];
    for (Symbol c = 0; c < row.size(); ++c) {
      if (row[c] == 0.0) continue;
      if (d == 2) {
        if (out.size() == max_len_) continue;
        out.push_back(c);
        transit(d, q, out, p * row[c], then);
        out.pop_back();
      } else {
        Continue after_child = [this, d, q, &then](std::vector<Symbol>& o, double pc) {
          transit(d, q, o, pc, then);
        };
        produce(d - 1, c, out, p * row[c], after_child);
      }
    }
  }

  void transit(std::size_t d, Symbol q, std::vector<Symbol>& out, double p, const Continue& then) {
    counter_.tick();
    const auto& level = spec_.level(d);
    const auto& row = level.trans[q];
    for (Symbol next = 0; next < row.size(); ++next) {
      if (row[next] == 0.0) continue;
      if (level.is_ending(next)) {
        then(out, p * row[next]);
      } else {
        produce(d, next, out, p * row[next], then);
      }
    }
  }

  const Spec& spec_;
  std::size_t max_len_;
  BranchCounter counter_;
  SequenceDistribution result_;
};

std::string flag_name(Flag f) {
  switch (f) {
    case Flag::Unspecified: return "unspecified";
    case Flag::False: return "FALSE";
    case Flag::True: return "TRUE";
  }
  return "?";
}

enum class StateRule { Identity, Transit, Produce, End };

// Which update the level-d state cell of the next column receives, given its
// own flag, the flag below it (absent for level 2, whose child is the output)
// and whether a level exists above.
StateRule state_rule(Flag own, std::optional<Flag> below, bool has_upper) {
  if (own == Flag::False) {
    if (!below || *below == Flag::True) return StateRule::Transit;
    if (*below == Flag::False) return StateRule::Identity;
  } else if (own == Flag::True) {
    return has_upper ? StateRule::Produce : StateRule::End;
  }
  throw ConfigError("no state rule for own=" + flag_name(own) +
                    " below=" + (below ? flag_name(*below) : std::string("none")));
}

// Resolves flags from level index k upward, branching over transits.
void resolve_flags(const Spec& spec, Column& column, std::size_t k, double p,
                   std::vector<std::pair<Column, double>>& out) {
  if (k == column.cells.size()) {
    out.emplace_back(column, p);
    return;
  }
  Cell& cell = column.cells[k];
  if (cell.ended != Flag::Unspecified || cell.transit) {
    throw ConfigError("flag cell at level " + std::to_string(k + 2) + " is already resolved");
  }
  if (k > 0 && column.cells[k - 1].ended == Flag::False) {
    // Child still running: copy FALSE, no transit.
    cell.ended = Flag::False;
    resolve_flags(spec, column, k + 1, p, out);
    cell.ended = Flag::Unspecified;
    return;
  }
  if (k > 0 && column.cells[k - 1].ended != Flag::True) {
    throw ConfigError("flag below level " + std::to_string(k + 2) + " is unspecified");
  }
  const auto& level = spec.level(k + 2);
  if (level.is_ending(cell.state)) {
    throw ConfigError("ending state " + std::to_string(cell.state) + " active at level " +
                      std::to_string(k + 2));
  }
  const auto& row = level.trans[cell.state];
  for (Symbol next = 0; next < row.size(); ++next) {
    if (row[next] == 0.0) continue;
    cell.transit = next;
    cell.ended = level.is_ending(next) ? Flag::True : Flag::False;
    resolve_flags(spec, column, k + 1, p * row[next], out);
  }
  cell.transit.reset();
  cell.ended = Flag::Unspecified;
}

// Fills next-column states from level index k downward, then the output.
// Without a resolved column (the first slice) every level below the root
// starts by production.
void build_next(const Spec& spec, const Column* resolved, Column& next, int k, double p,
                std::vector<std::pair<Column, double>>& out) {
  if (k < 0) {
    const auto& row = spec.level(2).prod[next.cells[0].state];
    for (Symbol y = 0; y < row.size(); ++y) {
      if (row[y] == 0.0) continue;
      next.output = y;
      out.emplace_back(next, p * row[y]);
    }
    return;
  }
  const auto level = static_cast<std::size_t>(k);
  const bool has_upper = level + 1 < next.cells.size();
  StateRule rule = StateRule::Produce;
  if (resolved) {
    std::optional<Flag> below;
    if (level > 0) below = resolved->cells[level - 1].ended;
    rule = state_rule(resolved->cells[level].ended, below, has_upper);
  }
  switch (rule) {
    case StateRule::Identity:
      next.cells[level].state = resolved->cells[level].state;
      build_next(spec, resolved, next, k - 1, p, out);
      return;
    case StateRule::Transit: {
      const auto& transit = resolved->cells[level].transit;
      if (!transit) {
        throw ConfigError("transit rule at level " + std::to_string(level + 2) + " without a transit");
      }
      next.cells[level].state = *transit;
      build_next(spec, resolved, next, k - 1, p, out);
      return;
    }
    case StateRule::Produce: {
      if (!has_upper) throw ConfigError("production rule at the root");
      const auto& row = spec.level(level + 3).prod[next.cells[level + 1].state];
      for (Symbol c = 0; c < row.size(); ++c) {
        if (row[c] == 0.0) continue;
        next.cells[level].state = c;
        build_next(spec, resolved, next, k - 1, p * row[c], out);
      }
      return;
    }
    case StateRule::End:
      throw ConfigError("root ended but the column was expanded");
  }
}

Column fresh_column(std::size_t levels) {
  Column c;
  c.cells.resize(levels);
  return c;
}

std::vector<double> row_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": expected an array of numbers");
  std::vector<double> row;
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(where + ": non-number entry");
    row.push_back(v.get<double>());
  }
  return row;
}

}  // namespace

void Spec::validate() const {
  if (num_outputs == 0) throw ConfigError("HHMM needs at least one output symbol");
  if (levels.empty()) throw ConfigError("HHMM needs at least two levels");
  for (std::size_t d = 2; d <= depth(); ++d) {
    const auto& lv = level(d);
    const std::string name = "level " + std::to_string(d);
    if (lv.num_states == 0) throw ConfigError(name + " has no states");
    if (lv.ending.size() != lv.num_states || lv.prod.size() != lv.num_states ||
        lv.trans.size() != lv.num_states) {
      throw ConfigError(name + ": tables must have one row per state");
    }
    for (Symbol q = 0; q < lv.num_states; ++q) {
      if (lv.is_ending(q)) continue;
      check_row(lv.prod[q], child_count(d), name + " prod row " + std::to_string(q));
      check_row(lv.trans[q], lv.num_states, name + " trans row " + std::to_string(q));
      if (d > 2) {
        const auto& child = level(d - 1);
        for (Symbol c = 0; c < child.num_states; ++c) {
          if (lv.prod[q][c] > 0.0 && child.is_ending(c)) {
            throw ConfigError(name + " prod row " + std::to_string(q) +
                              " starts level " + std::to_string(d - 1) + " in ending state " +
                              std::to_string(c));
          }
        }
      }
    }
  }
  const auto& root = levels.back();
  check_row(initial, root.num_states, "root initial law");
  for (Symbol q = 0; q < root.num_states; ++q) {
    if (initial[q] > 0.0 && root.is_ending(q)) {
      throw ConfigError("root initial law puts mass on ending state " + std::to_string(q));
    }
  }
}

SampleResult sample_recursive(const Spec& spec, Rng& rng, std::size_t max_outputs) {
  spec.validate();
  const std::size_t root = spec.depth();
  SampleResult result;
  if (max_outputs == 0) {
    result.truncated = true;
    return result;
  }
  // stack[i] is the active state of level root - i.
  std::vector<Symbol> stack{static_cast<Symbol>(rng.categorical(spec.initial))};
  while (true) {
    for (std::size_t d = root - (stack.size() - 1); d > 2; --d) {
      stack.push_back(static_cast<Symbol>(rng.categorical(spec.level(d).prod[stack.back()])));
    }
    result.outputs.push_back(static_cast<Symbol>(rng.categorical(spec.level(2).prod[stack.back()])));
    while (true) {
      const auto& lv = spec.level(root - (stack.size() - 1));
      const auto next = static_cast<Symbol>(rng.categorical(lv.trans[stack.back()]));
      if (!lv.is_ending(next)) {
        stack.back() = next;
        break;
      }
      stack.pop_back();
      if (stack.empty()) return result;
    }
    if (result.outputs.size() >= max_outputs) {
      result.truncated = true;
      return result;
    }
  }
}

SequenceDistribution enumerate_sequences(const Spec& spec, std::size_t max_len, double cap) {
  spec.validate();
  return RecursiveEnumerator(spec, max_len, cap).run();
}

bool Column::resolved() const {
  for (const auto& c : cells) {
    if (c.ended == Flag::Unspecified) return false;
  }
  return true;
}

std::vector<ColumnChoice> bn_initial(const Spec& spec) {
  spec.validate();
  const std::size_t levels = spec.levels.size();
  std::vector<std::pair<Column, double>> out;
  for (Symbol q = 0; q < spec.initial.size(); ++q) {
    if (spec.initial[q] == 0.0) continue;
    Column next = fresh_column(levels);
    next.cells[levels - 1].state = q;
    build_next(spec, nullptr, next, static_cast<int>(levels) - 2, spec.initial[q], out);
  }
  std::vector<ColumnChoice> choices;
  for (auto& [c, p] : out) choices.push_back({std::move(c), p});
  return choices;
}

std::vector<Successor> bn_successors(const Spec& spec, const Column& column) {
  const std::size_t levels = spec.levels.size();
  if (column.cells.size() != levels) throw ConfigError("column has the wrong number of levels");
  std::vector<std::pair<Column, double>> resolved;
  Column work = column;
  resolve_flags(spec, work, 0, 1.0, resolved);

  std::vector<Successor> out;
  for (auto& [res, p] : resolved) {
    if (state_rule(res.cells.back().ended, levels > 1 ? std::optional(res.cells[levels - 2].ended)
                                                      : std::nullopt,
                   false) == StateRule::End) {
      out.push_back({res, std::nullopt, p});
      continue;
    }
    std::vector<std::pair<Column, double>> nexts;
    Column next = fresh_column(levels);
    build_next(spec, &res, next, static_cast<int>(levels) - 1, p, nexts);
    for (auto& [n, pn] : nexts) out.push_back({res, std::move(n), pn});
  }
  return out;
}

Successor bn_step(const Spec& spec, const Column& column, Rng& rng) {
  auto successors = bn_successors(spec, column);
  std::vector<double> probs;
  probs.reserve(successors.size());
  for (const auto& s : successors) probs.push_back(s.probability);
  return std::move(successors[rng.categorical(probs)]);
}

SequenceDistribution bn_enumerate_sequences(const Spec& spec, std::size_t max_len, double cap) {
  SequenceDistribution result;
  BranchCounter counter(cap);
  std::vector<Symbol> out;
  std::function<void(const Column&, double)> expand = [&](const Column& column, double p) {
    counter.tick();
    out.push_back(column.output);
    if (out.size() <= max_len) {
      for (const auto& s : bn_successors(spec, column)) {
        if (s.next) {
          expand(*s.next, p * s.probability);
        } else {
          result[out] += p * s.probability;
        }
      }
    }
    out.pop_back();
  };
  for (const auto& start : bn_initial(spec)) expand(start.column, start.probability);
  return result;
}

Spec parse_spec(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("hhmm spec: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kSpecSchema) {
    throw FormatError("hhmm spec: schema must be \"" + std::string(kSpecSchema) + "\"");
  }
  Spec spec;
  try {
    spec.num_outputs = doc.at("num_outputs").get<std::size_t>();
    const json& levels = doc.at("levels");
    if (!levels.is_array()) throw FormatError("hhmm spec: levels must be an array");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const json& jl = levels[k];
      const std::string where = "hhmm spec: level " + std::to_string(k + 2);
      Level lv;
      lv.num_states = jl.at("states").get<std::size_t>();
      lv.ending.assign(lv.num_states, false);
      for (const auto& e : jl.at("ending")) {
        const auto q = e.get<std::size_t>();
        if (q >= lv.num_states) throw FormatError(where + ": ending state out of range");
        lv.ending[q] = true;
      }
      const json& prod = jl.at("prod");
      const json& trans = jl.at("trans");
      if (!prod.is_array() || prod.size() != lv.num_states || !trans.is_array() ||
          trans.size() != lv.num_states) {
        throw FormatError(where + ": prod and trans need one row per state");
      }
      for (std::size_t q = 0; q < lv.num_states; ++q) {
        if (lv.ending[q]) {
          if (!prod[q].is_null() || !trans[q].is_null()) {
            throw FormatError(where + ": ending state " + std::to_string(q) + " must have null rows");
          }
          lv.prod.emplace_back();
          lv.trans.emplace_back();
        } else {
          lv.prod.push_back(row_from_json(prod[q], where + " prod row " + std::to_string(q)));
          lv.trans.push_back(row_from_json(trans[q], where + " trans row " + std::to_string(q)));
        }
      }
      spec.levels.push_back(std::move(lv));
    }
    spec.initial = row_from_json(doc.at("initial"), "hhmm spec: initial");
  } catch (const json::exception& e) {
    throw FormatError(std::string("hhmm spec: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("hhmm spec: ") + e.what());
  }
  return spec;
}

std::string spec_to_text(const Spec& spec) {
  json doc;
  doc["schema"] = kSpecSchema;
  doc["num_outputs"] = spec.num_outputs;
  json levels = json::array();
  for (const auto& lv : spec.levels) {
    json ending = json::array();
    json prod = json::array();
    json trans = json::array();
    for (Symbol q = 0; q < lv.num_states; ++q) {
      if (lv.is_ending(q)) {
        ending.push_back(q);
        prod.push_back(nullptr);
        trans.push_back(nullptr);
      } else {
        prod.push_back(lv.prod[q]);
        trans.push_back(lv.trans[q]);
      }
    }
    levels.push_back({{"states", lv.num_states}, {"ending", ending}, {"prod", prod}, {"trans", trans}});
  }
  doc["levels"] = std::move(levels);
  doc["initial"] = spec.initial;
  return doc.dump(1) + "\n";
}

Spec load_spec(const std::filesystem::path& path) { return parse_spec(read_text_file(path)); }

}  // namespace cehhmm::hhmm
