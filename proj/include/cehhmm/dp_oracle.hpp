#pragma once

// Exact solvers for tiny finite-horizon problems, used as ground truth for
// the policy search. All three are deterministic; argmax ties go to the
// smallest action index (values within kTieTolerance count as equal).

#include <cstddef>
#include <vector>

#include "cehhmm/pomdp.hpp"

namespace cehhmm {

inline constexpr double kTieTolerance = 1e-12;
inline constexpr double kBeliefNodeCap = 1e6;
inline constexpr double kTreeSearchCap = 1e9;

struct MdpSolution {
  double value = 0.0;
  Symbol first_action = 0;
  /// W[t - 1][x * num_states + z] for t = 1..T.
  std::vector<std::vector<double>> w;
};

/// Backward recursion with the state fully observed. The action x_{t+1} is
/// chosen knowing (x_t, z_t); the terminal table is V_T(x, z) =
/// sum_y p(y | z) V(x, y, z). Throws ConfigError unless the evaluation is
/// terminal.
MdpSolution mdp_dp(const WorldModel& world, std::size_t horizon);

struct BeliefSolution {
  double value = 0.0;
  Symbol first_action = 0;
  std::size_t nodes = 0;
};

/// Recursion over unnormalized beliefs
///   beta_{t+1}(z') = sum_z b_t(z) p(y_t | z) p(z' | z, x_t),  b_1 = p(z_1),
/// expanded over the whole reachable tree. Accepts terminal and additive
/// evaluations. Throws CapExceeded when the node count
/// sum_{t<T} (|X||Y|)^t exceeds node_cap.
BeliefSolution pomdp_belief_dp(const WorldModel& world, std::size_t horizon,
                               double node_cap = kBeliefNodeCap);

/// Deterministic plan x_t(y_{1:t-1}). actions[t - 1][h] is the action at step t
/// after history h, where h reads y_{1:t-1} as a base-|Y| number (y_1 most
/// significant).
struct DecisionTree {
  std::size_t num_observations = 0;
  std::vector<std::vector<Symbol>> actions;

  std::size_t horizon() const { return actions.size(); }
  Symbol first_action() const { return actions.at(0).at(0); }
  std::size_t node_count() const;
};

/// Exact expected evaluation of a tree; works with any evaluation kind.
double evaluate_tree(const WorldModel& world, const DecisionTree& tree);

struct TreeSolution {
  DecisionTree tree;
  double value = 0.0;
};

/// Number of distinct trees, |X|^(sum_t |Y|^(t-1)), as a double.
double tree_count(std::size_t num_actions, std::size_t num_observations, std::size_t horizon);

/// Enumerates every decision tree and keeps the best; among equal values the
/// first in lexicographic order (root action most significant) wins. Throws
/// CapExceeded when tree_count * (|Z||Y|)^T exceeds cap.
TreeSolution brute_force_tree_search(const WorldModel& world, std::size_t horizon,
                                     double cap = kTreeSearchCap);

}  // namespace cehhmm
