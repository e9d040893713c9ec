#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <boost/math/distributions/chi_squared.hpp>
#include <numeric>

namespace cehhmm::testing {

std::vector<double> random_row(Rng& rng, std::size_t n, bool sparse) {
  std::vector<double> row(n);
  for (auto& v : row) v = 0.05 + rng.uniform();
  if (sparse && n > 1) {
    for (auto& v : row) {
      if (rng.uniform() < 0.33) v = 0.0;
    }
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
      row[rng.below(n)] = 1.0;
    }
  }
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  for (auto& v : row) v /= total;
  return row;
}

namespace {

void append(std::vector<double>& out, const std::vector<double>& row) {
  out.insert(out.end(), row.begin(), row.end());
}

}  // namespace

WorldModel random_world(Rng& rng, WorldShape s, EvalKind kind, bool sparse, bool quantized) {
  std::vector<double> initial = random_row(rng, s.states, sparse);
  std::vector<double> transition;
  for (std::size_t i = 0; i < s.states * s.actions; ++i) {
    append(transition, random_row(rng, s.states, sparse));
  }
  std::vector<double> observation;
  for (std::size_t z = 0; z < s.states; ++z) {
    append(observation, random_row(rng, s.observations, sparse));
  }
  std::vector<double> table(s.actions * s.observations * s.states);
  for (auto& v : table) v = quantized ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
  Evaluation eval = kind == EvalKind::Terminal
                        ? Evaluation::terminal(s.actions, s.observations, s.states, table)
                        : Evaluation::additive(s.actions, s.observations, s.states, table);
  return WorldModel(s.states, s.actions, s.observations, std::move(initial), std::move(transition),
                    std::move(observation), std::move(eval));
}

WorldShape random_shape(Rng& rng, std::size_t max_states, std::size_t max_actions,
                        std::size_t max_observations) {
  return {1 + rng.below(max_states), 1 + rng.below(max_actions), 1 + rng.below(max_observations)};
}

namespace {

// Table entry averaged over the observation law of z.
double expected_step(const Evaluation& e, const WorldModel& w, Symbol x, StateId z) {
  double v = 0.0;
  for (Symbol y = 0; y < w.num_observations(); ++y) v += w.observation(z, y) * e.table_value(x, y, z);
  return v;
}

}  // namespace

double enumerate_state_feedback_policies(const WorldModel& world, std::size_t horizon,
                                         double cap) {
  const auto& eval = world.evaluation();
  if (eval.kind() != Evaluation::Kind::Terminal) throw ConfigError("terminal evaluations only");
  const std::size_t X = world.num_actions();
  const std::size_t Z = world.num_states();
  const std::size_t rule = X * Z;
  const double count = static_cast<double>(X) *
                       std::pow(static_cast<double>(X), static_cast<double>(rule * (horizon - 1)));
  if (count > cap) throw CapExceeded("state-feedback enumeration", count, cap);

  // digits[0] = x_1, then one block of X*Z digits per later step.
  std::vector<Symbol> digits(1 + rule * (horizon - 1), 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    // Forward pass over the joint law of (x_t, z_t).
    std::vector<double> joint(rule, 0.0);
    for (StateId z = 0; z < Z; ++z) joint[digits[0] * Z + z] = world.initial(z);
    for (std::size_t t = 2; t <= horizon; ++t) {
      std::vector<double> next(rule, 0.0);
      const Symbol* f = &digits[1 + rule * (t - 2)];
      for (Symbol x = 0; x < X; ++x) {
        for (StateId z = 0; z < Z; ++z) {
          const double p = joint[x * Z + z];
          if (p == 0.0) continue;
          const Symbol xn = f[x * Z + z];
          for (StateId zn = 0; zn < Z; ++zn) next[xn * Z + zn] += p * world.transition(z, x, zn);
        }
      }
      joint = std::move(next);
    }
    double v = 0.0;
    for (Symbol x = 0; x < X; ++x) {
      for (StateId z = 0; z < Z; ++z) v += joint[x * Z + z] * expected_step(eval, world, x, z);
    }
    best = std::max(best, v);
    std::size_t k = 0;
    while (k < digits.size() && ++digits[k] == X) digits[k++] = 0;
    if (k == digits.size()) break;
  }
  return best;
}

double best_open_loop_value(const WorldModel& world, std::size_t horizon) {
  const auto& eval = world.evaluation();
  const std::size_t X = world.num_actions();
  const std::size_t Z = world.num_states();
  std::vector<Symbol> seq(horizon, 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> belief(world.initial_row().begin(), world.initial_row().end());
    double v = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      if (t > 0) {
        std::vector<double> next(Z, 0.0);
        for (StateId z = 0; z < Z; ++z) {
          for (StateId zn = 0; zn < Z; ++zn) next[zn] += belief[z] * world.transition(z, seq[t - 1], zn);
        }
        belief = std::move(next);
      }
      const bool counts = eval.kind() == Evaluation::Kind::Additive || t + 1 == horizon;
      if (!counts) continue;
      for (StateId z = 0; z < Z; ++z) v += belief[z] * expected_step(eval, world, seq[t], z);
    }
    best = std::max(best, v);
    std::size_t k = 0;
    while (k < horizon && ++seq[k] == X) seq[k++] = 0;
    if (k == horizon) break;
  }
  return best;
}

PolicyParams random_params(Rng& rng, const HhmmStructure& structure, bool sparse) {
  PolicyParams params(structure);
  for (auto& table : params.tables()) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto row = random_row(rng, table.outcomes(), sparse);
      std::copy(row.begin(), row.end(), table.row(r).begin());
    }
  }
  return params;
}

hhmm::Spec random_spec(Rng& rng, std::size_t max_depth, std::size_t max_states,
                       std::size_t max_outputs) {
  hhmm::Spec spec;
  spec.num_outputs = 1 + rng.below(max_outputs);
  const std::size_t depth = 2 + rng.below(max_depth - 1);
  for (std::size_t d = 2; d <= depth; ++d) {
    hhmm::Level lv;
    lv.num_states = 2 + rng.below(max_states - 1);
    lv.ending.assign(lv.num_states, false);
    // The last state always ends; the others end with probability 1/4.
    lv.ending.back() = true;
    for (std::size_t q = 1; q + 1 < lv.num_states; ++q) lv.ending[q] = rng.uniform() < 0.25;
    spec.levels.push_back(std::move(lv));
  }
  for (std::size_t d = 2; d <= depth; ++d) {
    hhmm::Level& lv = spec.levels[d - 2];
    lv.prod.assign(lv.num_states, {});
    lv.trans.assign(lv.num_states, {});
    const std::size_t children = spec.child_count(d);
    for (std::size_t q = 0; q < lv.num_states; ++q) {
      if (lv.ending[q]) continue;
      auto prod = random_row(rng, children, true);
      if (d > 2) {
        // Never start a child in one of its ending states.
        const auto& child = spec.levels[d - 3];
        for (std::size_t c = 0; c < children; ++c) {
          if (child.ending[c]) prod[c] = 0.0;
        }
        if (std::accumulate(prod.begin(), prod.end(), 0.0) == 0.0) prod[0] = 1.0;
        const double total = std::accumulate(prod.begin(), prod.end(), 0.0);
        for (auto& v : prod) v /= total;
      }
      lv.prod[q] = std::move(prod);
      auto trans = random_row(rng, lv.num_states, true);
      // Keep some mass on the last (ending) state so every run terminates.
      if (trans.back() < 0.2) {
        for (auto& v : trans) v *= 0.8;
        trans.back() += 0.2;
      }
      lv.trans[q] = std::move(trans);
    }
  }
  const auto& root = spec.levels.back();
  spec.initial.assign(root.num_states, 0.0);
  for (std::size_t q = 0; q < root.num_states; ++q) {
    if (!root.ending[q]) spec.initial[q] = 0.05 + rng.uniform();
  }
  const double total = std::accumulate(spec.initial.begin(), spec.initial.end(), 0.0);
  for (auto& v : spec.initial) v /= total;
  spec.validate();
  return spec;
}

double chi_square_upper_tail(double statistic, double dof) {
  if (dof < 1.0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double chi_square_from_cells(std::vector<std::pair<double, double>> cells) {
  // Pool small cells, smallest expected first, until each pooled cell reaches 5.
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<std::pair<double, double>> pooled;
  std::pair<double, double> acc{0.0, 0.0};
  for (const auto& c : cells) {
    acc.first += c.first;
    acc.second += c.second;
    if (acc.second >= 5.0) {
      pooled.push_back(acc);
      acc = {0.0, 0.0};
    }
  }
  if (acc.second > 0.0 || acc.first > 0.0) {
    if (pooled.empty()) {
      pooled.push_back(acc);
    } else {
      pooled.back().first += acc.first;
      pooled.back().second += acc.second;
    }
  }
  double stat = 0.0;
  for (const auto& [o, e] : pooled) {
    if (e <= 0.0) {
      if (o > 0.0) return 0.0;
      continue;
    }
    stat += (o - e) * (o - e) / e;
  }
  return chi_square_upper_tail(stat, static_cast<double>(pooled.size()) - 1.0);
}

}  // namespace cehhmm::testing
