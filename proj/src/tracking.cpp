#include "cehhmm/tracking.hpp"

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>

namespace cehhmm::tracking {

namespace {

constexpr std::string_view kTargetGlyph = "×";
constexpr std::string_view kBGlyph = "•";
constexpr std::string_view kCGlyph = "○";
constexpr std::string_view kEmptyGlyph = "·";

constexpr int kHeadingCount = 4;

Heading rotate(Heading h, int quarter_turns) {
  return static_cast<Heading>((static_cast<int>(h) + quarter_turns + kHeadingCount) % kHeadingCount);
}

bool forward_bit(const MobilePose& m, Cell r) {
  switch (m.heading) {
    case Heading::Up: return r.j < m.j;
    case Heading::Right: return r.i > m.i;
    case Heading::Down: return r.j > m.j;
    case Heading::Left: return r.i < m.i;
  }
  return false;
}

Heading parse_heading(std::string_view s) {
  for (int h = 0; h < kHeadingCount; ++h) {
    if (to_string(static_cast<Heading>(h)) == s) return static_cast<Heading>(h);
  }
  throw FormatError("frame: unknown heading '" + std::string(s) + "'");
}

std::string pose_text(const MobilePose& m) {
  return "(" + std::to_string(m.i) + "," + std::to_string(m.j) + "," +
         std::string(to_string(m.heading)) + ")";
}

class TrackingPlay final : public BlackBoxPlay {
 public:
  explicit TrackingPlay(const TrackingConfig& config) : config_(config) {}

  Symbol execute(Symbol action, Rng& rng) override {
    if (action >= kNumActions) throw ConfigError("tracking action out of range");
    state_ = started_ ? advance(state_, previous_action_, config_, rng) : initial_state(config_, rng);
    started_ = true;
    const Symbol y = observe(state_, config_);
    value_ += encounter_increment(state_, config_.proximity_radius);
    previous_action_ = action;
    return y;
  }

  double evaluate() const override { return value_; }

 private:
  TrackingConfig config_;
  TrackingState state_;
  Symbol previous_action_ = 0;
  bool started_ = false;
  double value_ = 0.0;
};

}  // namespace

std::string_view to_string(Heading h) {
  switch (h) {
    case Heading::Up: return "up";
    case Heading::Right: return "right";
    case Heading::Down: return "down";
    case Heading::Left: return "left";
  }
  return "?";
}

std::string_view to_string(Move m) {
  switch (m) {
    case Move::TurnLeft: return "turn-left";
    case Move::TurnRight: return "turn-right";
    case Move::Forward: return "forward";
    case Move::Stay: return "no-move";
  }
  return "?";
}

void TrackingConfig::validate() const {
  if (scenario < 1 || scenario > 3) throw ConfigError("tracking scenario must be 1, 2 or 3");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (proximity_radius < 0) throw ConfigError("proximity radius must be nonnegative");
  if (grid < 4 || grid > 1000) throw ConfigError("grid size must lie in [4, 1000]");
}

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.i - b.i), std::abs(a.j - b.j)); }

bool in_grid(Cell c, int grid) { return c.i >= 0 && c.j >= 0 && c.i < grid && c.j < grid; }

MobilePose mobile_move(const MobilePose& pose, Move move, int grid) {
  MobilePose out = pose;
  switch (move) {
    case Move::TurnLeft: out.heading = rotate(pose.heading, -1); break;
    case Move::TurnRight: out.heading = rotate(pose.heading, 1); break;
    case Move::Stay: break;
    case Move::Forward: {
      Cell next = pose.cell();
      switch (pose.heading) {
        case Heading::Up: --next.j; break;
        case Heading::Right: ++next.i; break;
        case Heading::Down: ++next.j; break;
        case Heading::Left: --next.i; break;
      }
      if (in_grid(next, grid)) {
        out.i = next.i;
        out.j = next.j;
      }
      break;
    }
  }
  return out;
}

Symbol observe(const TrackingState& state, const TrackingConfig& config) {
  if (config.scenario == 2) return 0;
  Symbol y = 0;
  if (forward_bit(state.b, state.target)) y |= kBForward;
  if (chebyshev(state.b.cell(), state.target) < config.proximity_radius) y |= kBNear;
  if (forward_bit(state.c, state.target)) y |= kCForward;
  if (chebyshev(state.c.cell(), state.target) < config.proximity_radius) y |= kCNear;
  return y;
}

std::vector<WeightedCell> target_step_distribution(const TrackingState& state, int grid) {
  std::vector<WeightedCell> out;
  out.reserve(9);
  double total = 0.0;
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const Cell c{state.target.i + di, state.target.j + dj};
      if (!in_grid(c, grid)) continue;
      const double w = (c.i - state.b.i) * (c.i - state.b.i) + (c.j - state.b.j) * (c.j - state.b.j) +
                       (c.i - state.c.i) * (c.i - state.c.i) + (c.j - state.c.j) * (c.j - state.c.j);
      out.push_back({c, w});
      total += w;
    }
  }
  for (auto& wc : out) {
    wc.probability = total > 0.0 ? wc.probability / total : 1.0 / static_cast<double>(out.size());
  }
  return out;
}

int encounter_increment(const TrackingState& state, int radius) {
  const int d = std::min(chebyshev(state.b.cell(), state.target), chebyshev(state.c.cell(), state.target));
  return d <= radius ? 1 : 0;
}

TrackingState initial_state(const TrackingConfig& config, Rng& rng) {
  const int g = config.grid;
  TrackingState s;
  s.b = MobilePose{0, g - 1, Heading::Down};
  s.c = MobilePose{g - 1, g - 1, Heading::Down};
  s.turn = 1;
  if (config.scenario == 1) {
    s.target = Cell{g / 2, g / 2};
  } else {
    const int upper_rows = g / 2;
    const auto k = static_cast<int>(rng.below(static_cast<std::size_t>(g * upper_rows)));
    s.target = Cell{k % g, k / g};
  }
  return s;
}

TrackingState advance(const TrackingState& state, Symbol action, const TrackingConfig& config,
                      Rng& rng) {
  if (action >= kNumActions) throw ConfigError("tracking action out of range");
  TrackingState next = state;
  next.b = mobile_move(state.b, move_of_b(action), config.grid);
  next.c = mobile_move(state.c, move_of_c(action), config.grid);
  next.turn = state.turn + 1;
  if (config.scenario != 1) {
    const auto law = target_step_distribution(state, config.grid);
    double probs[9];
    for (std::size_t k = 0; k < law.size(); ++k) probs[k] = law[k].probability;
    next.target = law[rng.categorical(std::span<const double>(probs, law.size()))].cell;
  }
  return next;
}

std::string render_frame(const TrackingState& state, int grid) {
  std::string out = "t=" + std::to_string(state.turn) + " R=(" + std::to_string(state.target.i) +
                    "," + std::to_string(state.target.j) + ") B=" + pose_text(state.b) +
                    " C=" + pose_text(state.c) + " grid=" + std::to_string(grid) + "\n";
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      const Cell c{i, j};
      if (i > 0) out += ' ';
      if (c == state.target) {
        out += kTargetGlyph;
      } else if (c == state.b.cell()) {
        out += kBGlyph;
      } else if (c == state.c.cell()) {
        out += kCGlyph;
      } else {
        out += kEmptyGlyph;
      }
    }
    out += '\n';
  }
  return out;
}

TrackingState parse_frame(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) throw FormatError("frame: empty text");

  TrackingState s;
  int grid = 0;
  char b_heading[16] = {0};
  char c_heading[16] = {0};
  unsigned long long turn = 0;
  if (std::sscanf(header.c_str(), "t=%llu R=(%d,%d) B=(%d,%d,%15[a-z]) C=(%d,%d,%15[a-z]) grid=%d",
                  &turn, &s.target.i, &s.target.j, &s.b.i, &s.b.j, b_heading, &s.c.i, &s.c.j,
                  c_heading, &grid) != 10) {
    throw FormatError("frame: malformed header '" + header + "'");
  }
  s.turn = static_cast<std::size_t>(turn);
  s.b.heading = parse_heading(b_heading);
  s.c.heading = parse_heading(c_heading);
  if (grid < 1 || !in_grid(s.target, grid) || !in_grid(s.b.cell(), grid) ||
      !in_grid(s.c.cell(), grid)) {
    throw FormatError("frame: position outside the grid");
  }

  std::string line;
  for (int j = 0; j < grid; ++j) {
    if (!std::getline(in, line)) throw FormatError("frame: missing grid row " + std::to_string(j));
    std::istringstream row(line);
    std::string glyph;
    for (int i = 0; i < grid; ++i) {
      if (!(row >> glyph)) {
        throw FormatError("frame: row " + std::to_string(j) + " is too short");
      }
      const Cell c{i, j};
      std::string_view expected = kEmptyGlyph;
      if (c == s.target) {
        expected = kTargetGlyph;
      } else if (c == s.b.cell()) {
        expected = kBGlyph;
      } else if (c == s.c.cell()) {
        expected = kCGlyph;
      }
      if (glyph != expected) {
        throw FormatError("frame: cell (" + std::to_string(i) + "," + std::to_string(j) +
                          ") disagrees with the header");
      }
    }
    if (row >> glyph) throw FormatError("frame: row " + std::to_string(j) + " is too long");
  }
  return s;
}

TrackingWorld::TrackingWorld(TrackingConfig config)
    : config_(config),
      evaluation_(Evaluation::recursive([this](double acc, const StepContext& ctx) {
        return acc + encounter_increment(decode(ctx.state), config_.proximity_radius);
      })) {
  config_.validate();
}

StateId TrackingWorld::encode(const TrackingState& s) const {
  const auto g = static_cast<StateId>(config_.grid);
  const StateId poses = g * g * kHeadingCount;
  auto pose_id = [&](const MobilePose& m) {
    return (static_cast<StateId>(m.j) * g + static_cast<StateId>(m.i)) * kHeadingCount +
           static_cast<StateId>(m.heading);
  };
  const StateId target = static_cast<StateId>(s.target.j) * g + static_cast<StateId>(s.target.i);
  return (target * poses + pose_id(s.b)) * poses + pose_id(s.c);
}

TrackingState TrackingWorld::decode(StateId id) const {
  const auto g = static_cast<StateId>(config_.grid);
  const StateId poses = g * g * kHeadingCount;
  auto pose_of = [&](StateId p) {
    const StateId cell = p / kHeadingCount;
    return MobilePose{static_cast<int>(cell % g), static_cast<int>(cell / g),
                      static_cast<Heading>(p % kHeadingCount)};
  };
  TrackingState s;
  s.c = pose_of(id % poses);
  id /= poses;
  s.b = pose_of(id % poses);
  id /= poses;
  s.target = Cell{static_cast<int>(id % g), static_cast<int>(id / g)};
  return s;
}

StateId TrackingWorld::sample_initial(Rng& rng) const {
  return encode(initial_state(config_, rng));
}

StateId TrackingWorld::sample_transition(StateId state, Symbol action, Rng& rng) const {
  return encode(advance(decode(state), action, config_, rng));
}

Symbol TrackingWorld::sample_observation(StateId state, Rng&) const {
  return observe(decode(state), config_);
}

TrackingBlackBox::TrackingBlackBox(TrackingConfig config) : config_(config) { config_.validate(); }

std::unique_ptr<BlackBoxPlay> TrackingBlackBox::begin(std::size_t) const {
  return std::make_unique<TrackingPlay>(config_);
}

int replay_plan(const TrackingConfig& config, const std::vector<Symbol>& plan) {
  config.validate();
  if (config.scenario != 1) throw ConfigError("plan replay needs the deterministic scenario 1");
  Rng unused(0);
  TrackingState s = initial_state(config, unused);
  int value = encounter_increment(s, config.proximity_radius);
  const Symbol idle = joint_action(Move::Stay, Move::Stay);
  for (std::size_t t = 1; t < config.horizon; ++t) {
    s = advance(s, t <= plan.size() ? plan[t - 1] : idle, config, unused);
    value += encounter_increment(s, config.proximity_radius);
  }
  return value;
}

namespace {

std::vector<TrackingState> episode_states(const TrackingWorld& world, const Episode& episode) {
  if (!episode.states) throw ConfigError("trajectory dump needs an episode with states");
  std::vector<TrackingState> out;
  out.reserve(episode.horizon());
  for (std::size_t t = 0; t < episode.horizon(); ++t) {
    TrackingState s = world.decode((*episode.states)[t]);
    s.turn = t + 1;
    out.push_back(s);
  }
  return out;
}

}  // namespace

void write_trajectory_frames(std::ostream& out, const TrackingWorld& world, const Episode& episode) {
  const auto states = episode_states(world, episode);
  int value = 0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    value += encounter_increment(states[t], world.config().proximity_radius);
    out << render_frame(states[t], world.config().grid);
    out << "action B=" << to_string(move_of_b(episode.actions[t]))
        << " C=" << to_string(move_of_c(episode.actions[t]))
        << " observation=" << episode.observations[t] << " V=" << value << "\n\n";
  }
}

void write_trajectory_csv(std::ostream& out, const TrackingWorld& world, const Episode& episode) {
  const auto states = episode_states(world, episode);
  out << "t,target_i,target_j,b_i,b_j,b_heading,c_i,c_j,c_heading,action,observation,value\n";
  int value = 0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto& s = states[t];
    value += encounter_increment(s, world.config().proximity_radius);
    out << s.turn << ',' << s.target.i << ',' << s.target.j << ',' << s.b.i << ',' << s.b.j << ','
        << to_string(s.b.heading) << ',' << s.c.i << ',' << s.c.j << ',' << to_string(s.c.heading)
        << ',' << episode.actions[t] << ',' << episode.observations[t] << ',' << value << '\n';
  }
}

}  // namespace cehhmm::tracking
