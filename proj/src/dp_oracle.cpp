#include "cehhmm/dp_oracle.hpp"

#include <cmath>
#include <limits>

namespace cehhmm {

namespace {

void check_horizon(std::size_t horizon) {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
}

// Reward collected at step t for (x, y, z).
double stage_reward(const Evaluation& ev, std::size_t t, std::size_t horizon, Symbol x, Symbol y,
                    StateId z) {
  if (ev.kind() == Evaluation::Kind::Additive) return ev.table_value(x, y, z);
  return t == horizon ? ev.table_value(x, y, z) : 0.0;
}

class BeliefSolver {
 public:
  BeliefSolver(const WorldModel& world, std::size_t horizon) : w_(world), horizon_(horizon) {}

  // Returns W_t(b) and the maximizing action.
  double solve(std::size_t t, const std::vector<double>& b, Symbol* argmax) {
    ++nodes_;
    const std::size_t nz = w_.num_states();
    const auto& ev = w_.evaluation();
    double best = -std::numeric_limits<double>::infinity();
    Symbol best_x = 0;
    std::vector<double> next(nz);
    for (Symbol x = 0; x < w_.num_actions(); ++x) {
      double value = 0.0;
      for (Symbol y = 0; y < w_.num_observations(); ++y) {
        for (StateId z = 0; z < nz; ++z) {
          const double mass = b[z] * w_.observation(z, y);
          if (mass != 0.0) value += mass * stage_reward(ev, t, horizon_, x, y, z);
        }
        if (t == horizon_) continue;
        std::fill(next.begin(), next.end(), 0.0);
        for (StateId z = 0; z < nz; ++z) {
          const double mass = b[z] * w_.observation(z, y);
          if (mass == 0.0) continue;
          for (StateId zn = 0; zn < nz; ++zn) next[zn] += mass * w_.transition(z, x, zn);
        }
        value += solve(t + 1, next, nullptr);
      }
      if (value > best + kTieTolerance) {
        best = value;
        best_x = x;
      }
    }
    if (argmax) *argmax = best_x;
    return best;
  }

  std::size_t nodes() const { return nodes_; }

 private:
  const WorldModel& w_;
  std::size_t horizon_;
  std::size_t nodes_ = 0;
};

class TreeEvaluator {
 public:
  TreeEvaluator(const WorldModel& world, const DecisionTree& tree) : w_(world), tree_(tree) {}

  double run() { return visit(1, 0, 0, 0, 1.0, w_.evaluation().initial()); }

 private:
  double visit(std::size_t t, std::size_t history, StateId z_prev, Symbol x_prev, double prob,
               double acc) {
    const std::size_t horizon = tree_.horizon();
    if (t > horizon) return prob * acc;
    const Symbol x = tree_.actions[t - 1][history];
    const auto& ev = w_.evaluation();
    double total = 0.0;
    for (StateId z = 0; z < w_.num_states(); ++z) {
      const double pz = t == 1 ? w_.initial(z) : w_.transition(z_prev, x_prev, z);
      if (pz == 0.0) continue;
      for (Symbol y = 0; y < w_.num_observations(); ++y) {
        const double py = w_.observation(z, y);
        if (py == 0.0) continue;
        const double next_acc = ev.step(acc, StepContext{t, horizon, x, y, z});
        total += visit(t + 1, history * tree_.num_observations + y, z, x, prob * pz * py, next_acc);
      }
    }
    return total;
  }

  const WorldModel& w_;
  const DecisionTree& tree_;
};

}  // namespace

MdpSolution mdp_dp(const WorldModel& world, std::size_t horizon) {
  check_horizon(horizon);
  const auto& ev = world.evaluation();
  if (ev.kind() != Evaluation::Kind::Terminal) {
    throw ConfigError("mdp_dp needs a terminal evaluation");
  }
  const std::size_t nz = world.num_states();
  const std::size_t nx = world.num_actions();
  MdpSolution sol;
  sol.w.assign(horizon, std::vector<double>(nx * nz, 0.0));

  auto& last = sol.w[horizon - 1];
  for (Symbol x = 0; x < nx; ++x) {
    for (StateId z = 0; z < nz; ++z) {
      double v = 0.0;
      for (Symbol y = 0; y < world.num_observations(); ++y) {
        v += world.observation(z, y) * ev.table_value(x, y, z);
      }
      last[x * nz + z] = v;
    }
  }
  for (std::size_t t = horizon - 1; t >= 1; --t) {
    const auto& next = sol.w[t];
    auto& cur = sol.w[t - 1];
    for (Symbol x = 0; x < nx; ++x) {
      for (StateId z = 0; z < nz; ++z) {
        double best = -std::numeric_limits<double>::infinity();
        for (Symbol xn = 0; xn < nx; ++xn) {
          double v = 0.0;
          for (StateId zn = 0; zn < nz; ++zn) v += world.transition(z, x, zn) * next[xn * nz + zn];
          best = std::max(best, v);
        }
        cur[x * nz + z] = best;
      }
    }
  }

  sol.value = -std::numeric_limits<double>::infinity();
  for (Symbol x = 0; x < nx; ++x) {
    double v = 0.0;
    for (StateId z = 0; z < nz; ++z) v += world.initial(z) * sol.w[0][x * nz + z];
    if (v > sol.value + kTieTolerance) {
      sol.value = v;
      sol.first_action = x;
    }
  }
  return sol;
}

BeliefSolution pomdp_belief_dp(const WorldModel& world, std::size_t horizon, double node_cap) {
  check_horizon(horizon);
  if (!world.evaluation().tabular()) {
    throw ConfigError("pomdp_belief_dp needs a terminal or additive evaluation");
  }
  const double branching =
      static_cast<double>(world.num_actions()) * static_cast<double>(world.num_observations());
  double estimate = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) estimate += std::pow(branching, static_cast<double>(t));
  if (estimate > node_cap) throw CapExceeded("belief tree", estimate, node_cap);

  BeliefSolver solver(world, horizon);
  std::vector<double> b(world.initial_row().begin(), world.initial_row().end());
  BeliefSolution sol;
  sol.value = solver.solve(1, b, &sol.first_action);
  sol.nodes = solver.nodes();
  return sol;
}

std::size_t DecisionTree::node_count() const {
  std::size_t n = 0;
  for (const auto& level : actions) n += level.size();
  return n;
}

double evaluate_tree(const WorldModel& world, const DecisionTree& tree) {
  if (tree.horizon() == 0) throw ConfigError("decision tree is empty");
  if (tree.num_observations != world.num_observations()) {
    throw ConfigError("decision tree and world disagree on observations");
  }
  std::size_t width = 1;
  for (const auto& level : tree.actions) {
    if (level.size() != width) throw ConfigError("decision tree level has the wrong width");
    for (Symbol x : level) {
      if (x >= world.num_actions()) throw ConfigError("decision tree action out of range");
    }
    width *= tree.num_observations;
  }
  return TreeEvaluator(world, tree).run();
}

double tree_count(std::size_t num_actions, std::size_t num_observations, std::size_t horizon) {
  double nodes = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    nodes += std::pow(static_cast<double>(num_observations), static_cast<double>(t));
  }
  return std::pow(static_cast<double>(num_actions), nodes);
}

TreeSolution brute_force_tree_search(const WorldModel& world, std::size_t horizon, double cap) {
  check_horizon(horizon);
  const std::size_t nx = world.num_actions();
  const std::size_t ny = world.num_observations();
  const double trees = tree_count(nx, ny, horizon);
  const double work =
      trees * std::pow(static_cast<double>(world.num_states() * ny), static_cast<double>(horizon));
  if (work > cap) throw CapExceeded("decision-tree enumeration", work, cap);

  DecisionTree tree{ny, {}};
  std::size_t width = 1;
  for (std::size_t t = 0; t < horizon; ++t) {
    tree.actions.emplace_back(width, 0);
    width *= ny;
  }
  // Flat view of the nodes, root first, for odometer-style enumeration.
  std::vector<Symbol*> digits;
  for (auto& level : tree.actions) {
    for (auto& x : level) digits.push_back(&x);
  }

  TreeSolution best{tree, -std::numeric_limits<double>::infinity()};
  while (true) {
    const double v = TreeEvaluator(world, tree).run();
    if (v > best.value + kTieTolerance) {
      best.value = v;
      best.tree = tree;
    }
    std::size_t k = digits.size();
    while (k > 0) {
      --k;
      if (++*digits[k] < nx) break;
      *digits[k] = 0;
      if (k == 0) return best;
    }
    if (digits.empty()) return best;
  }
}

}  // namespace cehhmm
