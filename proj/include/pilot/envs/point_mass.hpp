#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pilot/envs/goal_space.hpp"
#include "pilot/replay/replay_buffer.hpp"
#include "pilot/numerics/random.hpp"

namespace pilot {

using Vec2 = std::array<double, 2>;

struct EnvState {
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
  int step_count = 0;

  std::vector<double> vector() const {
    return {position[0], position[1], velocity[0], velocity[1]};
  }

  static EnvState from_vector(std::span<const double> v, int step_count = 0) {
    if (v.size() != 4) throw ShapeError("EnvState::from_vector: expected 4 values");
    return {{v[0], v[1]}, {v[2], v[3]}, step_count};
  }

  bool operator==(const EnvState&) const = default;
};

inline constexpr std::size_t kStateDim = 4;
inline constexpr std::size_t kBaseActionDim = 2;
inline constexpr double kAccelScale = 0.1;
inline constexpr double kMaxSpeed = 0.5;

struct Rect {
  double x_min, x_max, y_min, y_max;

  bool contains_open(const Vec2& p) const {
    return p[0] > x_min && p[0] < x_max && p[1] > y_min && p[1] < y_max;
  }
  bool contains_closed(const Vec2& p) const {
    return p[0] >= x_min && p[0] <= x_max && p[1] >= y_min && p[1] <= y_max;
  }

  // True if the segment a->b passes through the open interior (Liang-Barsky).
  bool segment_hits_interior(const Vec2& a, const Vec2& b) const {
    double enter = 0.0;
    double exit = 1.0;
    const double lo[2] = {x_min, y_min};
    const double hi[2] = {x_max, y_max};
    for (int k = 0; k < 2; ++k) {
      const double d = b[k] - a[k];
      if (d == 0.0) {
        if (!(a[k] > lo[k] && a[k] < hi[k])) return false;
        continue;
      }
      double t1 = (lo[k] - a[k]) / d;
      double t2 = (hi[k] - a[k]) / d;
      if (t1 > t2) std::swap(t1, t2);
      enter = std::max(enter, t1);
      exit = std::min(exit, t2);
      if (!(enter < exit)) return false;
    }
    return enter < exit;
  }
};

// U-shaped maze: the wall spans from the left boundary to x = 6, leaving a
// gap on the right between the start region (below) and goal region (above).
struct MazeLayout {
  static constexpr Rect kBounds{0.0, 10.0, 0.0, 10.0};
  static constexpr Rect kWall{0.0, 6.0, 4.5, 5.5};
  static constexpr Vec2 kStart{1.0, 1.0};
  static constexpr Vec2 kCanonicalGoal{1.0, 9.0};
  static constexpr double kStartJitter = 0.5;
};

struct ActionLiftSpec {
  std::size_t base_dim = kBaseActionDim;
  double gravity_scale = 0.8;

  std::size_t lifted_dim() const { return 2 * base_dim; }
};

// h_i = (-exp(a_i + 1) + exp(a_{m+i})) / 1.5 for i < m. The published slice
// a[n/2:-1] would drop the last element; it is read here as a[n/2:n] so the
// output keeps the base dimension m.
inline std::vector<double> lift_action(std::span<const double> a, const ActionLiftSpec& spec) {
  if (a.size() != spec.lifted_dim()) {
    throw ShapeError("lift_action: expected " + std::to_string(spec.lifted_dim()) +
                     " components, got " + std::to_string(a.size()));
  }
  const std::size_t m = spec.base_dim;
  std::vector<double> h(m);
  for (std::size_t i = 0; i < m; ++i) h[i] = (-std::exp(a[i] + 1.0) + std::exp(a[m + i])) / 1.5;
  return h;
}

inline constexpr std::size_t kLiftedObsDim = 64;
inline constexpr std::uint64_t kLiftedObsSeed = 20230117;

// Fixed random sinusoidal features of the 4-dim state:
//   obs_k = sin(sum_j W_kj u_j + b_k),  u = (px / 10, py / 10, vx / 0.5, vy / 0.5)
// W ~ 2 N(0, 1), b ~ U(-pi, pi), drawn once from kLiftedObsSeed.
struct ObservationLift {
  std::array<std::array<double, kStateDim>, kLiftedObsDim> weight{};
  std::array<double, kLiftedObsDim> bias{};

  static const ObservationLift& instance() {
    static const ObservationLift lift = [] {
      ObservationLift l;
      Rng rng(kLiftedObsSeed);
      for (auto& row : l.weight) {
        for (double& w : row) w = 2.0 * standard_normal(rng);
      }
      for (double& b : l.bias) b = uniform(rng, -std::numbers::pi, std::numbers::pi);
      return l;
    }();
    return lift;
  }
};

inline std::vector<double> lift_observation(const EnvState& s) {
  const auto& lift = ObservationLift::instance();
  const double u[kStateDim] = {s.position[0] / 10.0, s.position[1] / 10.0,
                               s.velocity[0] / kMaxSpeed, s.velocity[1] / kMaxSpeed};
  std::vector<double> out(kLiftedObsDim);
  for (std::size_t k = 0; k < kLiftedObsDim; ++k) {
    double z = lift.bias[k];
    for (std::size_t j = 0; j < kStateDim; ++j) z += lift.weight[k][j] * u[j];
    out[k] = std::sin(z);
  }
  return out;
}

enum class EnvKind {
  kMaze2d,
  kPointMass,
  kPointMassLiftedAction,
  kPointMassLiftedObs,
  kMaze2dLiftedObs,
};

// uniform: p_g is uniform over free space. canonical: the fixed maze task
// (start below the wall, goal jittered around (1, 9) above it).
enum class GoalMode { kUniform, kCanonical };

inline const char* env_name(EnvKind k) {
  switch (k) {
    case EnvKind::kMaze2d: return "maze2d";
    case EnvKind::kPointMass: return "pointmass";
    case EnvKind::kPointMassLiftedAction: return "pointmass_lifted_action";
    case EnvKind::kPointMassLiftedObs: return "pointmass_lifted_obs";
    case EnvKind::kMaze2dLiftedObs: return "maze2d_lifted_obs";
  }
  return "?";
}

inline std::optional<EnvKind> parse_env_kind(const std::string& name) {
  for (EnvKind k : {EnvKind::kMaze2d, EnvKind::kPointMass, EnvKind::kPointMassLiftedAction,
                    EnvKind::kPointMassLiftedObs, EnvKind::kMaze2dLiftedObs}) {
    if (name == env_name(k)) return k;
  }
  return std::nullopt;
}

struct StepResult {
  EnvState next_state;
  std::vector<double> achieved_goal;
  double reward = 0.0;
  double sparse_reward = 0.0;  // reward before any bonus shaping
  bool done = false;
  bool success = false;
};

// Per-dimension affine map (x - offset) * scale applied before network inputs.
struct Affine {
  std::vector<double> offset;
  std::vector<double> scale;

  std::size_t dim() const { return offset.size(); }
};

// Everything network constructors need to know about an environment's inputs.
struct InputLayout {
  Affine obs;
  Affine goal;
  std::vector<std::size_t> goal_in_obs;
  Affine obs_delta;
};

// Point-mass double integrator on [0, 10]^2, optionally with the maze wall
// and the action / observation lifting wrappers. Value type; step() is pure.
class GoalEnv {
 public:
  explicit GoalEnv(EnvKind kind, GoalMode mode = GoalMode::kUniform) : kind_(kind), mode_(mode) {
    const bool maze = kind == EnvKind::kMaze2d || kind == EnvKind::kMaze2dLiftedObs;
    goal_space_ = {2, maze ? 1.0 : 0.1, "position"};
    episode_length_ = maze ? 50 : 100;
    if (kind == EnvKind::kPointMassLiftedAction) action_lift_ = ActionLiftSpec{};
  }

  EnvKind kind() const { return kind_; }
  GoalMode goal_mode() const { return mode_; }
  std::string name() const { return env_name(kind_); }
  bool has_wall() const { return kind_ == EnvKind::kMaze2d || kind_ == EnvKind::kMaze2dLiftedObs; }
  bool lifted_observation() const {
    return kind_ == EnvKind::kPointMassLiftedObs || kind_ == EnvKind::kMaze2dLiftedObs;
  }
  const std::optional<ActionLiftSpec>& action_lift() const { return action_lift_; }
  const GoalSpaceSpec& goal_space() const { return goal_space_; }
  int episode_length() const { return episode_length_; }
  void set_episode_length(int n) { episode_length_ = n; }

  std::size_t state_dim() const { return kStateDim; }
  std::size_t obs_dim() const { return lifted_observation() ? kLiftedObsDim : kStateDim; }
  std::size_t action_dim() const {
    return action_lift_ ? action_lift_->lifted_dim() : kBaseActionDim;
  }
  std::size_t goal_dim() const { return goal_space_.goal_dim; }

  std::vector<double> phi(const EnvState& s) const { return {s.position[0], s.position[1]}; }

  std::vector<double> observe(const EnvState& s) const {
    return lifted_observation() ? lift_observation(s) : s.vector();
  }

  Affine observation_normalizer() const {
    if (lifted_observation()) {
      return {std::vector<double>(kLiftedObsDim, 0.0), std::vector<double>(kLiftedObsDim, 1.0)};
    }
    return {{5.0, 5.0, 0.0, 0.0}, {0.2, 0.2, 1.0 / kMaxSpeed, 1.0 / kMaxSpeed}};
  }
  Affine goal_normalizer() const { return {{5.0, 5.0}, {0.2, 0.2}}; }

  // Columns of the observation holding the achieved goal; empty when the
  // observation is lifted and positions are not directly visible.
  std::vector<std::size_t> goal_in_observation() const {
    if (lifted_observation()) return {};
    return {0, 1};
  }

  // Scale of one-step observation differences: |dp| <= 0.5, |dv| <= 0.1.
  Affine observation_delta_normalizer() const {
    if (lifted_observation()) {
      return {std::vector<double>(kLiftedObsDim, 0.0), std::vector<double>(kLiftedObsDim, 2.0)};
    }
    return {{0.0, 0.0, 0.0, 0.0}, {1.0 / kMaxSpeed, 1.0 / kMaxSpeed, 1.0 / kAccelScale, 1.0 / kAccelScale}};
  }

  InputLayout input_layout() const {
    return {observation_normalizer(), goal_normalizer(), goal_in_observation(),
            observation_delta_normalizer()};
  }

  std::pair<double, double> reward_bounds() const { return {0.0, 1.0}; }

  RelabelSpec relabel_spec(double future_fraction) const {
    return {RelabelStrategy::kFuture, future_fraction, {}, {}};
  }

  std::pair<EnvState, std::vector<double>> reset(Rng& rng) const {
    EnvState s;
    if (has_wall()) {
      s.position = {MazeLayout::kStart[0] + uniform(rng, -MazeLayout::kStartJitter, MazeLayout::kStartJitter),
                    MazeLayout::kStart[1] + uniform(rng, -MazeLayout::kStartJitter, MazeLayout::kStartJitter)};
    } else {
      s.position = {uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0)};
    }
    return {s, sample_goal(rng)};
  }

  std::pair<EnvState, std::vector<double>> reset(std::uint64_t seed) const {
    Rng rng(seed);
    return reset(rng);
  }

  std::vector<double> sample_goal(Rng& rng) const {
    if (has_wall() && mode_ == GoalMode::kCanonical) {
      return {MazeLayout::kCanonicalGoal[0] + uniform(rng, -MazeLayout::kStartJitter, MazeLayout::kStartJitter),
              MazeLayout::kCanonicalGoal[1] + uniform(rng, -MazeLayout::kStartJitter, MazeLayout::kStartJitter)};
    }
    while (true) {
      Vec2 g{uniform(rng, 0.0, 10.0), uniform(rng, 0.0, 10.0)};
      if (!has_wall() || !MazeLayout::kWall.contains_closed(g)) return {g[0], g[1]};
    }
  }

  StepResult step(const EnvState& s, std::span<const double> action,
                  std::span<const double> desired_goal) const {
    if (action.size() != action_dim()) {
      throw ShapeError(name() + ": action has " + std::to_string(action.size()) +
                       " components, expected " + std::to_string(action_dim()));
    }
    std::vector<double> a(action.begin(), action.end());
    for (double& x : a) {
      if (std::isnan(x)) throw InputError(name() + ": NaN action component");
      x = std::clamp(x, -1.0, 1.0);
    }
    double gravity = 1.0;
    if (action_lift_) {
      a = lift_action(a, *action_lift_);
      for (double& x : a) x = std::clamp(x, -1.0, 1.0);
      gravity = action_lift_->gravity_scale;
    }
    StepResult r;
    EnvState& n = r.next_state;
    n.step_count = s.step_count + 1;
    Vec2 target;
    for (int k = 0; k < 2; ++k) {
      n.velocity[k] = std::clamp(s.velocity[k] + kAccelScale * gravity * a[k], -kMaxSpeed, kMaxSpeed);
      target[k] = s.position[k] + n.velocity[k];
      if (target[k] < MazeLayout::kBounds.x_min || target[k] > MazeLayout::kBounds.x_max) {
        target[k] = std::clamp(target[k], 0.0, 10.0);
        n.velocity[k] = 0.0;
      }
    }
    n.position = has_wall() ? resolve_wall(s.position, target, n.velocity) : target;
    r.achieved_goal = phi(n);
    r.reward = sparse_reward(r.achieved_goal, desired_goal, goal_space_);
    r.sparse_reward = r.reward;
    r.success = r.reward > 0.0;
    r.done = n.step_count >= episode_length_;
    return r;
  }

 private:
  // Cancels the displacement of the axis whose motion would enter the wall.
  static Vec2 resolve_wall(const Vec2& from, const Vec2& to, Vec2& velocity) {
    const Rect& wall = MazeLayout::kWall;
    if (!wall.segment_hits_interior(from, to)) return to;
    const Vec2 x_only{to[0], from[1]};
    if (!wall.segment_hits_interior(from, x_only)) {
      velocity[1] = 0.0;
      return x_only;
    }
    const Vec2 y_only{from[0], to[1]};
    if (!wall.segment_hits_interior(from, y_only)) {
      velocity[0] = 0.0;
      return y_only;
    }
    velocity = {0.0, 0.0};
    return from;
  }

  EnvKind kind_;
  GoalMode mode_;
  GoalSpaceSpec goal_space_;
  int episode_length_ = 50;
  std::optional<ActionLiftSpec> action_lift_;
};

}  // namespace pilot
