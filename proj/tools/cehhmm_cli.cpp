// cehhmm: train, evaluate and inspect hierarchical-memory policies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cehhmm/experiment.hpp"

namespace {

struct ExperimentOptions {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Named preset (see 'cehhmm presets')");
    cmd->add_option("--config", config, "Experiment file; its fields override the preset");
    cmd->add_option("--seed", seed, "Seed; overrides the config");
    cmd->add_option("--threads", threads, "Sampling threads (0 = all cores); results do not depend on it");
  }

  cehhmm::ExperimentConfig resolve() const {
    std::optional<cehhmm::ExperimentConfig> base;
    if (!preset.empty()) base = cehhmm::preset(preset);
    cehhmm::ExperimentConfig c;
    if (!config.empty()) {
      c = cehhmm::load_experiment(config, base);
    } else if (base) {
      c = *base;
    } else {
      throw cehhmm::ConfigError("give --preset or --config");
    }
    if (seed) c.ce.seed = *seed;
    c.ce.threads = threads;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-entropy search for hierarchical-memory POMDP policies"};
  app.require_subcommand(1);

  ExperimentOptions train_opts;
  std::string train_out = "out";
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Run the policy search and store the best policy");
  train_opts.attach(train);
  train->add_option("--out", train_out, "Output directory");
  train->add_flag("--quiet", quiet, "No progress lines");

  ExperimentOptions eval_opts;
  std::string eval_policy;
  std::string eval_out;
  std::optional<std::size_t> eval_rollouts;
  auto* eval = app.add_subcommand("eval", "Score a stored policy with fresh rollouts");
  eval_opts.attach(eval);
  eval->add_option("--policy", eval_policy, "Policy document")->required();
  eval->add_option("--rollouts", eval_rollouts, "Number of rollouts; overrides the config");
  eval->add_option("--out", eval_out, "Directory for eval.json");

  ExperimentOptions roll_opts;
  std::string roll_policy;
  std::string roll_out = "out";
  auto* rollout = app.add_subcommand("rollout", "Dump one episode turn by turn");
  roll_opts.attach(rollout);
  rollout->add_option("--policy", roll_policy, "Policy document")->required();
  rollout->add_option("--out", roll_out, "Output directory");

  std::string oracle_world;
  std::size_t oracle_horizon = 1;
  std::string oracle_solver = "all";
  auto* oracle = app.add_subcommand("oracle", "Solve a small world file exactly");
  oracle->add_option("--world", oracle_world, "World file")->required();
  oracle->add_option("--horizon", oracle_horizon, "Horizon T")->required();
  oracle->add_option("--solver", oracle_solver, "mdp, belief, tree or all");

  std::string demo_spec;
  std::uint64_t demo_seed = 1;
  std::size_t demo_max_len = 6;
  std::size_t demo_samples = 10000;
  auto* demo = app.add_subcommand("hhmm-demo", "Compare the two HHMM semantics on a spec file");
  demo->add_option("--spec", demo_spec, "HHMM spec file")->required();
  demo->add_option("--seed", demo_seed, "Sampling seed");
  demo->add_option("--max-len", demo_max_len, "Longest output sequence enumerated");
  demo->add_option("--samples", demo_samples, "Sampled runs");

  app.add_subcommand("presets", "List the built-in presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto config = train_opts.resolve();
      cehhmm::cmd_train(config, train_out, quiet ? nullptr : &std::cout);
    } else if (eval->parsed()) {
      auto config = eval_opts.resolve();
      if (eval_rollouts) config.ce.evaluation_rollouts = *eval_rollouts;
      std::optional<std::filesystem::path> out;
      if (!eval_out.empty()) out = eval_out;
      cehhmm::cmd_eval(config, eval_policy, out, std::cout);
    } else if (rollout->parsed()) {
      const auto config = roll_opts.resolve();
      const double v = cehhmm::cmd_rollout(config, roll_policy, roll_out);
      std::cout << "episode evaluation " << v << ", frames in " << roll_out << "\n";
    } else if (oracle->parsed()) {
      cehhmm::cmd_oracle(oracle_world, oracle_horizon, cehhmm::parse_solver(oracle_solver),
                         std::cout);
    } else if (demo->parsed()) {
      const double diff =
          cehhmm::cmd_hhmm_demo(demo_spec, demo_seed, demo_max_len, demo_samples, std::cout);
      return diff <= 1e-9 ? 0 : 3;
    } else {
      for (const auto& name : cehhmm::preset_names()) std::cout << name << "\n";
    }
  } catch (const cehhmm::CapExceeded& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
