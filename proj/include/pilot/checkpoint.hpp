#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "pilot/binary_io.hpp"
#include "pilot/transfer/goal_planner.hpp"
#include "pilot/udpo/critic.hpp"
#include "pilot/udpo/policy.hpp"

namespace pilot {

// Checkpoint layout (little-endian):
//   "PILOTCKPT1"  u32 kind  u32 net_count
//   per net: u32 activation, u32 layer_count, (layer_count + 1) x u32 widths,
//            u32 raw input width n, f64 x n input offsets, f64 x n input scales,
//            u32 diff_count, diff_count x (u32 plus, u32 minus, f64 scale),
//            f64 x param_count parameters
enum class ArtifactKind : std::uint32_t {
  kDecoupledPolicy = 1,
  kBaselinePolicy = 2,
  kCritic = 3,
  kGoalPlanner = 4,
};

inline const char* artifact_name(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::kDecoupledPolicy: return "decoupled_policy";
    case ArtifactKind::kBaselinePolicy: return "baseline_policy";
    case ArtifactKind::kCritic: return "critic";
    case ArtifactKind::kGoalPlanner: return "goal_planner";
  }
  return "unknown";
}

namespace ckpt {

inline constexpr std::string_view kMagic = "PILOTCKPT1";

inline void write_net(std::ostream& os, const Net& net) {
  const auto& widths = net.params.widths();
  binary::write_u32(os, static_cast<std::uint32_t>(net.params.activation()));
  binary::write_u32(os, static_cast<std::uint32_t>(net.params.num_layers()));
  for (std::size_t w : widths) binary::write_u32(os, static_cast<std::uint32_t>(w));
  binary::write_u32(os, static_cast<std::uint32_t>(net.raw_dim()));
  binary::write_f64s(os, net.input.offset);
  binary::write_f64s(os, net.input.scale);
  binary::write_u32(os, static_cast<std::uint32_t>(net.diffs.size()));
  for (const DiffFeature& d : net.diffs) {
    binary::write_u32(os, d.plus);
    binary::write_u32(os, d.minus);
    binary::write_f64(os, d.scale);
  }
  binary::write_f64s(os, net.params.values());
}

inline Net read_net(std::istream& is) {
  const std::uint32_t act = binary::read_u32(is);
  if (act > 1) throw LoadError("checkpoint: unknown activation code " + std::to_string(act));
  const std::uint32_t layers = binary::read_u32(is);
  if (layers == 0 || layers > 64) throw LoadError("checkpoint: bad layer count " + std::to_string(layers));
  std::vector<std::size_t> widths(layers + 1);
  for (std::size_t& w : widths) {
    w = binary::read_u32(is);
    if (w == 0 || w > (1u << 16)) throw LoadError("checkpoint: bad layer width " + std::to_string(w));
  }
  Net net;
  net.params = MlpParams(widths, static_cast<Activation>(act));
  const std::uint32_t raw = binary::read_u32(is);
  if (raw == 0 || raw > widths.front()) throw LoadError("checkpoint: bad input width " + std::to_string(raw));
  net.input.offset = binary::read_f64s(is, raw);
  net.input.scale = binary::read_f64s(is, raw);
  const std::uint32_t ndiff = binary::read_u32(is);
  if (raw + ndiff != widths.front()) {
    throw LoadError("checkpoint: input width " + std::to_string(raw) + " plus " + std::to_string(ndiff) +
                    " difference features does not match first layer width " +
                    std::to_string(widths.front()));
  }
  for (std::uint32_t k = 0; k < ndiff; ++k) {
    DiffFeature d;
    d.plus = binary::read_u32(is);
    d.minus = binary::read_u32(is);
    d.scale = binary::read_f64(is);
    if (d.plus >= raw || d.minus >= raw) throw LoadError("checkpoint: difference feature out of range");
    net.diffs.push_back(d);
  }
  const std::vector<double> values = binary::read_f64s(is, net.params.size());
  std::copy(values.begin(), values.end(), net.params.values().begin());
  return net;
}

inline void write_header(std::ostream& os, ArtifactKind kind, std::uint32_t nets) {
  binary::write_magic(os, kMagic);
  binary::write_u32(os, static_cast<std::uint32_t>(kind));
  binary::write_u32(os, nets);
}

inline std::vector<Net> read_nets(std::istream& is, ArtifactKind expected, std::uint32_t nets) {
  binary::expect_magic(is, kMagic);
  const auto kind = static_cast<ArtifactKind>(binary::read_u32(is));
  if (kind != expected) {
    throw LoadError(std::string("checkpoint holds a ") + artifact_name(kind) + ", expected a " +
                    artifact_name(expected));
  }
  const std::uint32_t count = binary::read_u32(is);
  if (count != nets) throw LoadError("checkpoint: expected " + std::to_string(nets) + " networks");
  std::vector<Net> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_net(is));
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open " + path);
  return is;
}

inline ArtifactKind peek_kind(const std::string& path) {
  std::ifstream is = open_in(path);
  binary::expect_magic(is, kMagic);
  return static_cast<ArtifactKind>(binary::read_u32(is));
}

}  // namespace ckpt

inline void save_checkpoint(const std::string& path, const DecoupledPolicy& p) {
  std::ofstream os = ckpt::open_out(path);
  ckpt::write_header(os, ArtifactKind::kDecoupledPolicy, 2);
  ckpt::write_net(os, p.planner);
  ckpt::write_net(os, p.inverse_dynamics);
}

inline void save_checkpoint(const std::string& path, const BaselinePolicy& p) {
  std::ofstream os = ckpt::open_out(path);
  ckpt::write_header(os, ArtifactKind::kBaselinePolicy, 1);
  ckpt::write_net(os, p.actor);
}

inline void save_checkpoint(const std::string& path, const Critic& c) {
  std::ofstream os = ckpt::open_out(path);
  ckpt::write_header(os, ArtifactKind::kCritic, 4);
  for (const Net* n : {&c.q1, &c.q2, &c.q1_target, &c.q2_target}) ckpt::write_net(os, *n);
}

inline void save_checkpoint(const std::string& path, const GoalPlanner& f) {
  std::ofstream os = ckpt::open_out(path);
  ckpt::write_header(os, ArtifactKind::kGoalPlanner, 1);
  ckpt::write_net(os, f.net);
}

inline DecoupledPolicy load_decoupled_policy(const std::string& path) {
  std::ifstream is = ckpt::open_in(path);
  auto nets = ckpt::read_nets(is, ArtifactKind::kDecoupledPolicy, 2);
  DecoupledPolicy p;
  p.planner = std::move(nets[0]);
  p.inverse_dynamics = std::move(nets[1]);
  p.state_dim = p.planner.params.out_dim() / 2;
  const std::size_t in = p.planner.raw_dim();
  if (in <= p.state_dim || p.inverse_dynamics.raw_dim() != 2 * p.state_dim) {
    throw LoadError("checkpoint: planner and inverse dynamics disagree on state width");
  }
  p.goal_dim = in - p.state_dim;
  p.action_dim = p.inverse_dynamics.params.out_dim() / 2;
  return p;
}

inline BaselinePolicy load_baseline_policy(const std::string& path, std::size_t goal_dim) {
  std::ifstream is = ckpt::open_in(path);
  auto nets = ckpt::read_nets(is, ArtifactKind::kBaselinePolicy, 1);
  BaselinePolicy p;
  p.actor = std::move(nets[0]);
  if (p.actor.raw_dim() <= goal_dim) throw LoadError("checkpoint: actor input too narrow");
  p.goal_dim = goal_dim;
  p.obs_dim = p.actor.raw_dim() - goal_dim;
  p.action_dim = p.actor.params.out_dim() / 2;
  return p;
}

inline Critic load_critic(const std::string& path, std::size_t action_dim) {
  std::ifstream is = ckpt::open_in(path);
  auto nets = ckpt::read_nets(is, ArtifactKind::kCritic, 4);
  Critic c;
  c.q1 = std::move(nets[0]);
  c.q2 = std::move(nets[1]);
  c.q1_target = std::move(nets[2]);
  c.q2_target = std::move(nets[3]);
  c.action_dim = action_dim;
  return c;
}

inline GoalPlanner load_goal_planner(const std::string& path) {
  std::ifstream is = ckpt::open_in(path);
  auto nets = ckpt::read_nets(is, ArtifactKind::kGoalPlanner, 1);
  GoalPlanner f;
  f.net = std::move(nets[0]);
  f.goal_dim = f.net.params.out_dim() / 2;
  if (f.net.raw_dim() != 2 * f.goal_dim) throw LoadError("checkpoint: goal planner input width");
  return f;
}

// Shape compatibility check used before running a loaded artifact in an env.
inline void require_dims(const std::string& what, std::size_t have, std::size_t want) {
  if (have != want) {
    throw LoadError(what + ": checkpoint has width " + std::to_string(have) + ", environment needs " +
                    std::to_string(want));
  }
}

}  // namespace pilot
