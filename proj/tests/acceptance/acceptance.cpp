// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --cli path/to/cehhmm --work scratch/dir [--only 1,5,9]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cehhmm/ce.hpp"
#include "cehhmm/dp_oracle.hpp"
#include "cehhmm/experiment.hpp"
#include "cehhmm/hhmm_appendix.hpp"
#include "cehhmm/hhmm_policy.hpp"
#include "cehhmm/pomdp.hpp"
#include "cehhmm/tracking.hpp"
#include "cehhmm/world_io.hpp"
#include "support.hpp"

using namespace cehhmm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

fs::path g_cli;
fs::path g_work;

// ---------------------------------------------------------------------------
// 1. belief DP against exhaustive tree search

Outcome oracle_equivalence() {
  Rng rng(1001);
  double worst = 0.0;
  int value_mismatch = 0, action_mismatch = 0;
  for (int k = 0; k < 200; ++k) {
    const auto shape = testing::random_shape(rng, 3, 3, 3);
    const std::size_t horizon = 1 + rng.below(3);
    const auto kind = rng.below(2) ? testing::EvalKind::Terminal : testing::EvalKind::Additive;
    const bool quantized = rng.below(2) == 0;
    const auto world = testing::random_world(rng, shape, kind, rng.below(2) == 0, quantized);
    const auto belief = pomdp_belief_dp(world, horizon);
    // The largest class (3/3/3, T=3) sits just above the default cap.
    const auto tree = brute_force_tree_search(world, horizon, 1e10);
    const double diff = std::abs(belief.value - tree.value);
    worst = std::max(worst, diff);
    if (diff > 1e-9) ++value_mismatch;
    if (belief.first_action != tree.tree.first_action()) ++action_mismatch;
  }
  return {value_mismatch == 0 && action_mismatch == 0,
          "200 worlds, max |belief - tree| = " + fmt("%.2e", worst) + ", value mismatches " +
              std::to_string(value_mismatch) + ", first-action mismatches " +
              std::to_string(action_mismatch)};
}

// ---------------------------------------------------------------------------
// 2. state-observed DP against state-feedback enumeration

double feedback_policy_count(const testing::WorldShape& s, std::size_t horizon) {
  return std::pow(static_cast<double>(s.actions),
                  1.0 + static_cast<double>(s.actions * s.states * (horizon - 1)));
}

Outcome mdp_oracle() {
  Rng rng(1002);
  double worst = 0.0;
  int mismatches = 0;
  std::map<std::size_t, int> by_horizon;
  for (int k = 0; k < 200; ++k) {
    testing::WorldShape shape;
    std::size_t horizon = 1;
    // Redraw until plain enumeration stays under 2e4 policies.
    do {
      shape = testing::random_shape(rng, 3, 3, 3);
      horizon = 1 + rng.below(4);
    } while (feedback_policy_count(shape, horizon) > 2e4);
    ++by_horizon[horizon];
    const auto world = testing::random_world(rng, shape, testing::EvalKind::Terminal,
                                             rng.below(2) == 0, rng.below(2) == 0);
    const double dp = mdp_dp(world, horizon).value;
    const double brute = testing::enumerate_state_feedback_policies(world, horizon);
    const double diff = std::abs(dp - brute);
    worst = std::max(worst, diff);
    if (diff > 1e-9) ++mismatches;
  }
  std::string mix;
  for (const auto& [t, n] : by_horizon) mix += " T=" + std::to_string(t) + ":" + std::to_string(n);
  return {mismatches == 0, "200 MDPs (" + mix.substr(1) + "), max diff " + fmt("%.2e", worst) +
                               ", mismatches " + std::to_string(mismatches)};
}

// ---------------------------------------------------------------------------
// 3. policy search on tiny worlds

Outcome ce_near_optimal() {
  Rng rng(1003);
  int hits = 0;
  double worst_ratio = 1e300;
  for (int k = 0; k < 20; ++k) {
    const auto shape = testing::random_shape(rng, 3, 3, 3);
    const std::size_t horizon = 2 + rng.below(2);
    const auto world = testing::random_world(rng, shape, testing::EvalKind::Terminal);
    const double optimum = pomdp_belief_dp(world, horizon).value;
    CEConfig cfg;
    cfg.samples_per_iteration = 500;
    cfg.selective_rate = 0.5;
    cfg.horizon = horizon;
    cfg.convergence_patience = 50;
    cfg.evaluation_rollouts = 200;
    cfg.seed = 100 + static_cast<std::uint64_t>(k);
    GenerativeSource source(world);
    const auto r = run_ce(source, {{4, 4}, shape.actions, shape.observations}, cfg);
    const double value = exact_policy_value(world, HhmmPolicy(r.best_params), horizon, 1e9);
    const double ratio = optimum > 0.0 ? value / optimum : 1.0;
    worst_ratio = std::min(worst_ratio, ratio);
    if (value >= 0.95 * optimum) ++hits;
  }
  return {hits >= 18, std::to_string(hits) + "/20 instances within 95% of the optimum (worst " +
                          fmt("%.3f", worst_ratio) + ")"};
}

// ---------------------------------------------------------------------------
// 4. the refit maximizes the complete-data likelihood

Outcome ml_update_optimal() {
  Rng rng(1004);
  const HhmmStructure s{{2, 2}, 3, 2};
  std::size_t tried = 0, improved = 0;
  double worst_gain = -1e300;
  for (int set = 0; set < 100; ++set) {
    const auto gen = testing::random_params(rng, s, rng.below(2) == 0);
    const HhmmPolicy policy(gen);
    const std::size_t count = 5 + rng.below(16);
    const std::size_t horizon = 2 + rng.below(4);
    std::vector<Episode> eps;
    for (std::size_t i = 0; i < count; ++i) {
      Episode ep;
      ep.memory_levels = 2;
      std::vector<Symbol> prev;
      for (std::size_t t = 0; t < horizon; ++t) {
        std::vector<Symbol> mem(2);
        const auto y = t == 0 ? std::nullopt : std::optional<Symbol>(ep.observations.back());
        ep.actions.push_back(policy.step(prev, y, rng, mem));
        ep.observations.push_back(static_cast<Symbol>(rng.below(2)));
        ep.memories.insert(ep.memories.end(), mem.begin(), mem.end());
        prev = mem;
      }
      eps.push_back(std::move(ep));
    }
    const auto best = ml_update(s, std::span<const Episode>(eps), 0.0, gen);
    auto total = [&](const PolicyParams& p) {
      double sum = 0.0;
      for (const auto& e : eps) sum += policy_log_prob(p, e);
      return sum;
    };
    const double base = total(best);
    for (int trial = 0; trial < 1000; ++trial) {
      auto moved = best;
      auto tables = moved.tables();
      auto& table = tables[rng.below(tables.size())];
      auto row = table.row(rng.below(table.rows()));
      // Random direction inside the simplex tangent space.
      std::vector<double> d(row.size());
      double mean = 0.0;
      for (auto& v : d) mean += (v = rng.uniform() - 0.5);
      mean /= static_cast<double>(d.size());
      bool feasible = true;
      for (std::size_t i = 0; i < d.size(); ++i) {
        row[i] += 1e-3 * (d[i] - mean);
        feasible = feasible && row[i] >= 0.0;
      }
      if (!feasible) continue;
      ++tried;
      const double gain = total(moved) - base;
      worst_gain = std::max(worst_gain, gain);
      if (gain > 1e-9) ++improved;
    }
  }
  return {improved == 0 && tried > 0,
          std::to_string(tried) + " feasible perturbations over 100 elite sets, " +
              std::to_string(improved) + " improved; largest change " + fmt("%.2e", worst_gain)};
}

// ---------------------------------------------------------------------------
// 5. parameter counts

Outcome parameter_counts() {
  const auto two = param_count({{16, 16}, tracking::kNumActions, tracking::kNumObservations});
  const auto four = param_count({{16, 2, 2, 2}, tracking::kNumActions, tracking::kNumObservations});
  return {two == 4320 && four == 758,
          "16/16: " + std::to_string(two) + ", 16/2/2/2: " + std::to_string(four)};
}

// ---------------------------------------------------------------------------
// 6. case 1: replayed plans, exact optimum, then the search

std::vector<Symbol> plan_b() {
  using tracking::Move;
  std::vector<Symbol> plan{tracking::joint_action(Move::TurnLeft, Move::Stay)};
  for (int k = 0; k < 7; ++k) plan.push_back(tracking::joint_action(Move::Forward, Move::Stay));
  plan.push_back(tracking::joint_action(Move::TurnLeft, Move::Stay));
  for (int k = 0; k < 6; ++k) plan.push_back(tracking::joint_action(Move::Forward, Move::Stay));
  return plan;
}

std::vector<Symbol> plan_c() {
  using tracking::Move;
  std::vector<Symbol> plan{tracking::joint_action(Move::Stay, Move::TurnRight)};
  for (int k = 0; k < 6; ++k) plan.push_back(tracking::joint_action(Move::Stay, Move::Forward));
  plan.push_back(tracking::joint_action(Move::Stay, Move::TurnRight));
  for (int k = 0; k < 6; ++k) plan.push_back(tracking::joint_action(Move::Stay, Move::Forward));
  return plan;
}

// Shortest move sequence taking one mobile into the encounter zone of the
// fixed target, by breadth-first search over its poses.
std::vector<tracking::Move> shortest_approach(const tracking::MobilePose& start, tracking::Cell target,
                                              const tracking::TrackingConfig& config) {
  using tracking::MobilePose;
  auto key = [&](const MobilePose& p) {
    return (p.i * config.grid + p.j) * 4 + static_cast<int>(p.heading);
  };
  std::map<int, std::pair<int, int>> parent;  // pose key -> (previous key, move)
  std::map<int, MobilePose> pose_of;
  std::deque<MobilePose> queue{start};
  parent[key(start)] = {-1, -1};
  pose_of[key(start)] = start;
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    if (tracking::chebyshev(p.cell(), target) <= config.proximity_radius) {
      std::vector<tracking::Move> moves;
      for (int k = key(p); parent[k].first >= 0; k = parent[k].first) {
        moves.insert(moves.begin(), static_cast<tracking::Move>(parent[k].second));
      }
      return moves;
    }
    for (int m = 0; m < static_cast<int>(tracking::kMovesPerMobile); ++m) {
      const auto q = tracking::mobile_move(p, static_cast<tracking::Move>(m), config.grid);
      if (parent.count(key(q))) continue;
      parent[key(q)] = {key(p), m};
      queue.push_back(q);
    }
  }
  return {};
}

Outcome case1() {
  tracking::TrackingConfig config;
  config.scenario = 1;
  Rng rng(0);
  const auto start = tracking::initial_state(config, rng);
  const int b = tracking::replay_plan(config, plan_b());
  const int c = tracking::replay_plan(config, plan_c());
  // The first encounter can never come earlier than the closer mobile's
  // shortest approach, so replaying both approaches bounds every plan.
  std::vector<Symbol> best_b, best_c;
  for (auto m : shortest_approach(start.b, start.target, config)) {
    best_b.push_back(tracking::joint_action(m, tracking::Move::Stay));
  }
  for (auto m : shortest_approach(start.c, start.target, config)) {
    best_c.push_back(tracking::joint_action(tracking::Move::Stay, m));
  }
  const int optimum = std::max(tracking::replay_plan(config, best_b), tracking::replay_plan(config, best_c));
  std::string detail = "replay B plan " + std::to_string(b) + ", C plan " + std::to_string(c) +
                       ", exact optimum " + std::to_string(optimum);
  const bool replay_ok = b == 85 && c == 86 && optimum == 86;

  const auto cfg = preset("case1");
  const auto summary = cmd_train(cfg, g_work / "case1", nullptr);
  detail += "; search mean " + fmt("%.2f", summary.mean) + " +- " + fmt("%.2f", summary.standard_error) +
            " over " + std::to_string(cfg.ce.evaluation_rollouts) + " rollouts after " +
            std::to_string(summary.iterations) + " iterations (need >= 80)";
  return {replay_ok && summary.mean >= 80.0, detail};
}

// ---------------------------------------------------------------------------
// 7 and 8. case 2 and case 3 share the two-level case-3 run

std::map<std::string, TrainSummary> g_runs;

const TrainSummary& trained(const std::string& name) {
  auto it = g_runs.find(name);
  if (it == g_runs.end()) {
    const auto start = std::chrono::steady_clock::now();
    it = g_runs.emplace(name, cmd_train(preset(name), g_work / name, nullptr)).first;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "  (" << name << ": mean " << fmt("%.2f", it->second.mean) << ", "
              << it->second.iterations << " iterations, " << fmt("%.0f", secs) << " s)" << std::endl;
  }
  return it->second;
}

Outcome memory_beats_reflex() {
  const auto& one = trained("case3-l1");
  const auto& two = trained("case3-l2");
  const double gap = two.mean - one.mean;
  return {gap >= 5.0, "case 3 two-level " + fmt("%.2f", two.mean) + " vs one-level " +
                          fmt("%.2f", one.mean) + ", gap " + fmt("%.2f", gap) + " (need >= 5)"};
}

Outcome masked_below_full() {
  const auto& masked = trained("case2");
  const auto& full = trained("case3-l2");
  const double gap = full.mean - masked.mean;
  return {gap >= 15.0, "case 2 " + fmt("%.2f", masked.mean) + " vs case 3 " + fmt("%.2f", full.mean) +
                           ", gap " + fmt("%.2f", gap) + " (need >= 15)"};
}

// ---------------------------------------------------------------------------
// 9. the two HHMM semantics

Outcome hhmm_equivalence() {
  Rng rng(1009);
  double worst = 0.0;
  std::size_t sequences = 0;
  for (int k = 0; k < 100; ++k) {
    const auto spec = testing::random_spec(rng, 3, 3, 3);
    const std::size_t max_len = 1 + rng.below(6);
    const auto a = hhmm::enumerate_sequences(spec, max_len);
    const auto b = hhmm::bn_enumerate_sequences(spec, max_len);
    std::set<std::vector<Symbol>> keys;
    for (const auto& [seq, p] : a) keys.insert(seq);
    for (const auto& [seq, p] : b) keys.insert(seq);
    for (const auto& seq : keys) {
      const double pa = a.count(seq) ? a.at(seq) : 0.0;
      const double pb = b.count(seq) ? b.at(seq) : 0.0;
      worst = std::max(worst, std::abs(pa - pb));
    }
    sequences += keys.size();
  }
  return {worst <= 1e-9, "100 specs, " + std::to_string(sequences) + " sequences, max diff " +
                             fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 10. sampling law and target law

// Exact law of (memory, action, state, observation) trajectories.
using Trajectory = std::vector<std::size_t>;

void enumerate_law(const WorldModel& world, const Policy& policy, std::size_t horizon, std::size_t t,
                   std::vector<Symbol> memory, std::optional<Symbol> prev_y, StateId prev_z, Symbol prev_x,
                   Trajectory& prefix, double mass, std::map<Trajectory, double>& out) {
  if (t == horizon) {
    out[prefix] += mass;
    return;
  }
  policy.for_each_outcome(memory, prev_y, [&](std::span<const Symbol> m, Symbol x, double px) {
    if (px == 0.0) return;
    for (StateId z = 0; z < world.num_states(); ++z) {
      const double pz = t == 0 ? world.initial(z) : world.transition(prev_z, prev_x, z);
      if (pz == 0.0) continue;
      for (Symbol y = 0; y < world.num_observations(); ++y) {
        const double py = world.observation(z, y);
        if (py == 0.0) continue;
        const auto size = prefix.size();
        prefix.insert(prefix.end(), m.begin(), m.end());
        prefix.insert(prefix.end(), {x, z, y});
        enumerate_law(world, policy, horizon, t + 1, std::vector<Symbol>(m.begin(), m.end()), y, z, x,
                      prefix, mass * px * pz * py, out);
        prefix.resize(size);
      }
    }
  });
}

Outcome distributional() {
  Rng rng(1010);
  const auto world = testing::random_world(rng, {2, 2, 2}, testing::EvalKind::Additive);
  const HhmmPolicy policy(testing::random_params(rng, {{2, 2}, 2, 2}));
  const std::size_t horizon = 3;
  std::map<Trajectory, double> exact;
  Trajectory prefix;
  enumerate_law(world, policy, horizon, 0, {}, std::nullopt, 0, 0, prefix, 1.0, exact);
  double total = 0.0;
  for (const auto& [k, p] : exact) total += p;

  const std::size_t n = 100000;
  std::map<Trajectory, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    Rng episode_rng(77, {i});
    const auto ep = sample_episode(world, policy, horizon, episode_rng);
    Trajectory key;
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto m = ep.memory(t);
      key.insert(key.end(), m.begin(), m.end());
      key.insert(key.end(), {ep.actions[t], (*ep.states)[t], ep.observations[t]});
    }
    ++counts[key];
  }
  const double p_value = testing::chi_square_p_value(counts, exact, n);

  // Target law rows over random states.
  double worst_row = 0.0;
  bool support_ok = true;
  for (int k = 0; k < 2000; ++k) {
    auto cell = [&] { return tracking::Cell{static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20))}; };
    tracking::TrackingState s;
    s.target = cell();
    const auto b = cell(), c = cell();
    s.b = {b.i, b.j, static_cast<tracking::Heading>(rng.below(4))};
    s.c = {c.i, c.j, static_cast<tracking::Heading>(rng.below(4))};
    double sum = 0.0;
    for (const auto& w : tracking::target_step_distribution(s)) {
      sum += w.probability;
      support_ok = support_ok && w.probability >= 0.0 && tracking::in_grid(w.cell, 20) &&
                   tracking::chebyshev(w.cell, s.target) <= 1;
    }
    worst_row = std::max(worst_row, std::abs(sum - 1.0));
  }
  return {p_value > 0.01 && std::abs(total - 1.0) <= 1e-12 && worst_row <= 1e-12 && support_ok,
          std::to_string(exact.size()) + " trajectory cells, chi-square p = " + fmt("%.3f", p_value) +
              "; 2000 target rows, max |sum - 1| = " + fmt("%.1e", worst_row)};
}

// ---------------------------------------------------------------------------
// 11. CLI output does not depend on the thread count

int run(const std::string& args) {
  const std::string cmd = "\"" + g_cli.string() + "\" " + args + " > \"" + (g_work / "cli.log").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const auto dir = g_work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "tracking.json")
      << R"({"schema":"cehhmm.experiment/1","preset":"case3-l2",)"
      << R"("ce":{"samples_per_iteration":200,"max_iterations":15,"evaluation_rollouts":100,"seed":11}})";
  std::ofstream(dir / "world.json")
      << R"({"schema":"cehhmm.experiment/1","environment":{"kind":"world","path":")"
      << (fs::path(CEHHMM_DATA_DIR) / "worlds" / "tiger.json").generic_string()
      << R"(","horizon":4},"policy":{"level_cardinalities":[2,2]},)"
      << R"("ce":{"samples_per_iteration":200,"convergence_patience":10,"max_iterations":200,)"
      << R"("evaluation_rollouts":300,"seed":5}})";
  const std::vector<std::string> threads{"1", "2", "4"};
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const std::string cfg : {"tracking", "world"}) {
    std::map<std::string, std::map<std::string, std::string>> outputs;  // file -> threads -> text
    for (const auto& th : threads) {
      const auto out = dir / (cfg + "_" + th);
      const auto conf = "--config \"" + (dir / (cfg + ".json")).string() + "\" --threads " + th;
      const auto policy = "\"" + (out / "train" / "policy.json").string() + "\"";
      if (run("train --quiet " + conf + " --out \"" + (out / "train").string() + "\"") != 0 ||
          run("eval " + conf + " --policy " + policy + " --out \"" + (out / "eval").string() + "\"") != 0 ||
          run("rollout " + conf + " --policy " + policy + " --out \"" + (out / "rollout").string() + "\"") != 0) {
        return {false, "cli run failed for " + cfg + " with " + th + " threads"};
      }
      for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext != ".json" && ext != ".csv" && ext != ".txt") continue;
        outputs[fs::relative(entry.path(), out).generic_string()][th] = file_text(entry.path());
      }
    }
    for (const auto& [file, by_threads] : outputs) {
      ++compared;
      bool same = by_threads.size() == threads.size();
      for (const auto& [th, text] : by_threads) same = same && text == by_threads.begin()->second;
      if (!same) differing.push_back(cfg + "/" + file);
    }
  }
  std::string detail = std::to_string(compared) + " output files compared across 1/2/4 threads";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& f : differing) detail += " " + f;
  }
  return {differing.empty() && compared >= 12, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string cli, work;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the cehhmm executable")->required();
  app.add_option("--work", work, "Scratch directory")->required();
  app.add_option("--only", only, "Run just these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  g_cli = fs::absolute(cli);
  g_work = fs::absolute(work);
  fs::create_directories(g_work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, oracle_equivalence}, {2, mdp_oracle},       {3, ce_near_optimal}, {4, ml_update_optimal},
      {5, parameter_counts},   {6, case1},            {7, memory_beats_reflex},
      {8, masked_below_full},  {9, hhmm_equivalence}, {10, distributional}, {11, cli_determinism}};

  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::cout << "criterion " << id << ": " << (outcome.pass ? "PASS" : "FAIL") << "  " << outcome.detail
              << "  [" << fmt("%.1f", secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
