#pragma once

// Experiment configuration, presets and the commands behind the CLI.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cehhmm/ce.hpp"
#include "cehhmm/hhmm_policy.hpp"
#include "cehhmm/pomdp.hpp"
#include "cehhmm/tracking.hpp"

namespace cehhmm {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kExperimentSchema = "cehhmm.experiment/1";

struct EnvironmentConfig {
  enum class Kind { Tracking, WorldFile };
  Kind kind = Kind::Tracking;
  tracking::TrackingConfig tracking;
  /// WorldFile only; relative paths resolve against the config file.
  std::filesystem::path world_path;
  /// WorldFile only; tracking uses tracking.horizon.
  std::size_t horizon = 1;
  /// Train through the black-box interface (no hidden states in episodes).
  bool black_box = false;

  std::size_t effective_horizon() const {
    return kind == Kind::Tracking ? tracking.horizon : horizon;
  }
};

struct ExperimentConfig {
  std::string preset = "custom";
  EnvironmentConfig environment;
  std::vector<std::size_t> level_cardinalities{16, 16};
  CEConfig ce;
  /// Also report means rounded to the nearest integer.
  bool round_report = true;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
ExperimentConfig preset(std::string_view name);

/// Reads "cehhmm.experiment/1" JSON. Fields that are present override
/// `base` (or the named "preset" inside the document). Throws FormatError.
ExperimentConfig parse_experiment(std::string_view text, const std::filesystem::path& base_dir,
                                  std::optional<ExperimentConfig> base = std::nullopt);
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 std::optional<ExperimentConfig> base = std::nullopt);
/// Canonical echo. The thread count is deliberately left out so that runs
/// on different machines produce identical files.
std::string experiment_to_text(const ExperimentConfig& config);

/// World plus the episode source used for training and evaluation.
class Environment {
 public:
  explicit Environment(const EnvironmentConfig& config);
  ~Environment();
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const World& world() const { return *world_; }
  const EpisodeSource& source() const { return *source_; }
  /// Non-null for tracking environments.
  const tracking::TrackingWorld* tracking_world() const { return tracking_; }
  /// Non-null for world files.
  const WorldModel* world_model() const { return model_; }
  std::size_t horizon() const { return horizon_; }
  HhmmStructure structure(const std::vector<std::size_t>& levels) const;

 private:
  std::unique_ptr<World> world_;
  std::unique_ptr<BlackBoxEnvironment> black_box_;
  std::unique_ptr<EpisodeSource> source_;
  const tracking::TrackingWorld* tracking_ = nullptr;
  const WorldModel* model_ = nullptr;
  std::size_t horizon_ = 0;
};

struct TrainSummary {
  double mean = 0.0;
  double standard_error = 0.0;
  double best_elite_mean = 0.0;
  std::size_t iterations = 0;
  std::string stop_reason;
  std::size_t param_count = 0;
};

/// Runs the policy search and writes policy.json, history.csv, summary.json
/// and manifest.json into out_dir. Progress goes to `log` (may be null).
TrainSummary cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       std::ostream* log);

/// Fresh-rollout evaluation of a stored policy; writes eval.json when out_dir
/// is given.
ValueEstimate cmd_eval(const ExperimentConfig& config, const std::filesystem::path& policy_path,
                       const std::optional<std::filesystem::path>& out_dir, std::ostream& report);

/// One episode under a stored policy, written as trajectory.txt and
/// trajectory.csv. Returns the episode score.
double cmd_rollout(const ExperimentConfig& config, const std::filesystem::path& policy_path,
                   const std::filesystem::path& out_dir);

enum class OracleSolver { Mdp, Belief, Tree, All };
OracleSolver parse_solver(std::string_view name);

/// Runs the exact solvers on a world file and prints value and first action.
/// Cap refusals propagate as CapExceeded.
void cmd_oracle(const std::filesystem::path& world_path, std::size_t horizon, OracleSolver solver,
                std::ostream& out);

/// Samples an HHMM spec and compares both exact sequence laws.
/// Returns the largest absolute difference between them.
double cmd_hhmm_demo(const std::filesystem::path& spec_path, std::uint64_t seed,
                     std::size_t max_len, std::size_t samples, std::ostream& out);

/// Writes manifest.json: tool version, command, seed, config echo and the
/// list of output files.
void write_manifest(const std::filesystem::path& out_dir, std::string_view command,
                    const ExperimentConfig& config, const std::vector<std::string>& outputs);

}  // namespace cehhmm
