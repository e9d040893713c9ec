#pragma once

// Two-mobile target tracking on a square lattice.
//
// Cells are (i, j) with i the column and j the row; j grows downward, so the
// mobiles start in the bottom corners (j = grid - 1) facing down. A turn at
// time t: the planner picks a joint move, both mobiles move, the target steps
// away from the mobiles' previous positions, the encounter counter is
// updated and the new observation is emitted.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cehhmm/ce.hpp"
#include "cehhmm/pomdp.hpp"

namespace cehhmm::tracking {

enum class Heading : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3 };
enum class Move : std::uint8_t { TurnLeft = 0, TurnRight = 1, Forward = 2, Stay = 3 };

inline constexpr std::size_t kMovesPerMobile = 4;
inline constexpr std::size_t kNumActions = 16;
inline constexpr std::size_t kNumObservations = 16;

/// Observation bits.
inline constexpr Symbol kBForward = 1;
inline constexpr Symbol kBNear = 2;
inline constexpr Symbol kCForward = 4;
inline constexpr Symbol kCNear = 8;

std::string_view to_string(Heading h);
std::string_view to_string(Move m);

struct Cell {
  int i = 0;
  int j = 0;
  bool operator==(const Cell&) const = default;
};

struct MobilePose {
  int i = 0;
  int j = 0;
  Heading heading = Heading::Down;

  Cell cell() const { return {i, j}; }
  bool operator==(const MobilePose&) const = default;
};

struct TrackingState {
  Cell target;
  MobilePose b;
  MobilePose c;
  std::size_t turn = 1;
  bool operator==(const TrackingState&) const = default;
};

struct TrackingConfig {
  /// 1: target pinned at the centre. 2: observations masked. 3: full game.
  int scenario = 3;
  std::size_t horizon = 100;
  int proximity_radius = 3;
  int grid = 20;

  void validate() const;
};

/// Joint action index: move of B in the low two bits, move of C above.
inline Symbol joint_action(Move b, Move c) {
  return static_cast<Symbol>(static_cast<unsigned>(b) + kMovesPerMobile * static_cast<unsigned>(c));
}
inline Move move_of_b(Symbol action) { return static_cast<Move>(action % kMovesPerMobile); }
inline Move move_of_c(Symbol action) { return static_cast<Move>(action / kMovesPerMobile); }

int chebyshev(Cell a, Cell b);
bool in_grid(Cell c, int grid);

/// Turns rotate a quarter (right: up, right, down, left, up). Forward moves one
/// cell along the heading and is a no-op at the border.
MobilePose mobile_move(const MobilePose& pose, Move move, int grid = 20);

/// Four bits (see kBForward...). "Near" is d_inf < 3. Scenario 2 always
/// returns 0.
Symbol observe(const TrackingState& state, const TrackingConfig& config);

struct WeightedCell {
  Cell cell;
  double probability = 0.0;
};

/// Next-cell law of the target: the grid-clipped 3x3 neighbourhood (staying
/// included), weighted by the summed squared distances to both mobiles.
/// Uniform over the support when every weight is 0.
std::vector<WeightedCell> target_step_distribution(const TrackingState& state, int grid = 20);

/// 1 when either mobile is within d_inf <= radius of the target.
int encounter_increment(const TrackingState& state, int radius = 3);

TrackingState initial_state(const TrackingConfig& config, Rng& rng);

/// One turn: both mobiles move, then the target draws its next cell from the
/// distribution at the pre-move positions (scenario 1 keeps it fixed).
TrackingState advance(const TrackingState& state, Symbol action, const TrackingConfig& config,
                      Rng& rng);

/// Grid picture: a header line with the turn and exact poses, then one line
/// per row. Glyphs: "×" target, "•" mobile B, "○" mobile C, "·" empty; the
/// target hides a mobile on the same cell and B hides C.
std::string render_frame(const TrackingState& state, int grid = 20);

/// Inverse of render_frame. Throws FormatError when the header and the grid
/// disagree or the text is malformed.
TrackingState parse_frame(std::string_view text);

/// Generative form for the policy search. States pack (target, B, C) into a
/// StateId; the evaluation counts encounter turns.
class TrackingWorld final : public World {
 public:
  explicit TrackingWorld(TrackingConfig config);
  // The evaluation refers back to this object.
  TrackingWorld(const TrackingWorld&) = delete;
  TrackingWorld& operator=(const TrackingWorld&) = delete;

  const TrackingConfig& config() const { return config_; }
  std::size_t num_actions() const override { return kNumActions; }
  std::size_t num_observations() const override { return kNumObservations; }
  StateId sample_initial(Rng& rng) const override;
  StateId sample_transition(StateId state, Symbol action, Rng& rng) const override;
  Symbol sample_observation(StateId state, Rng& rng) const override;
  const Evaluation& evaluation() const override { return evaluation_; }

  StateId encode(const TrackingState& state) const;
  /// turn is not part of the id and comes back as 1.
  TrackingState decode(StateId id) const;

 private:
  TrackingConfig config_;
  Evaluation evaluation_;
};

/// The same game as an opaque black box.
class TrackingBlackBox final : public BlackBoxEnvironment {
 public:
  explicit TrackingBlackBox(TrackingConfig config);
  std::size_t num_actions() const override { return kNumActions; }
  std::size_t num_observations() const override { return kNumObservations; }
  std::unique_ptr<BlackBoxPlay> begin(std::size_t horizon) const override;

 private:
  TrackingConfig config_;
};

/// Replays a joint-action plan (x_1, x_2, ...) from the initial state and
/// returns the evaluation over config.horizon turns; missing actions are
/// Stay/Stay. Scenario 1 only, since it is the deterministic one.
int replay_plan(const TrackingConfig& config, const std::vector<Symbol>& plan);

/// Per-turn dump of a sampled episode (needs states).
void write_trajectory_frames(std::ostream& out, const TrackingWorld& world, const Episode& episode);
/// t,target_i,target_j,b_i,b_j,b_heading,c_i,c_j,c_heading,action,observation,value
void write_trajectory_csv(std::ostream& out, const TrackingWorld& world, const Episode& episode);

}  // namespace cehhmm::tracking
