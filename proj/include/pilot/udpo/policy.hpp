#pragma once

#include <cmath>
#include <vector>

#include "pilot/numerics/gaussian.hpp"
#include "pilot/replay/replay_buffer.hpp"
#include "pilot/udpo/networks.hpp"

namespace pilot {

// Goal-conditioned state planner h(s' | s, g) composed with inverse dynamics
// I(a | s, s'). The planner predicts a residual: its Gaussian mean is
// s + net(s, g). Inverse dynamics models the pre-squash action; emitted
// actions are tanh of its samples.
struct DecoupledPolicy {
  Net planner;
  Net inverse_dynamics;
  std::size_t state_dim = 0;
  std::size_t goal_dim = 0;
  std::size_t action_dim = 0;

  static DecoupledPolicy create(const InputLayout& in, std::size_t action_dim, std::size_t hidden,
                                Rng& rng) {
    DecoupledPolicy p;
    p.state_dim = in.obs.dim();
    p.goal_dim = in.goal.dim();
    p.action_dim = action_dim;
    p.planner = Net::create(concat_affine({in.obs, in.goal}), hidden_layers(hidden), 2 * p.state_dim,
                            rng, goal_offset_features(p.state_dim, in.goal_in_obs));
    p.inverse_dynamics = Net::create(concat_affine({in.obs, in.obs}), hidden_layers(hidden),
                                     2 * action_dim, rng, transition_features(in.obs_delta));
    return p;
  }

  // Fresh inverse dynamics for a new action space; the planner is kept.
  DecoupledPolicy with_new_inverse_dynamics(std::size_t new_action_dim, std::size_t hidden,
                                            Rng& rng) const {
    DecoupledPolicy p = *this;
    p.action_dim = new_action_dim;
    p.inverse_dynamics = Net::create(inverse_dynamics.input, hidden_layers(hidden),
                                     2 * new_action_dim, rng, inverse_dynamics.diffs);
    return p;
  }

  bool operator==(const DecoupledPolicy&) const = default;
};

inline Tensor as_batch(const Tensor& t) {
  return t.rank() == 2 ? t : Tensor({1, t.size()}, t.values());
}

// Planner distribution over the next state, mean already shifted by s.
inline GaussianBatch planner_distribution(const DecoupledPolicy& p, const Tensor& state,
                                          const Tensor& goal, MlpTape* tape = nullptr) {
  if (state.cols() != p.state_dim || goal.cols() != p.goal_dim) {
    throw ShapeError("planner: expected state width " + std::to_string(p.state_dim) +
                     " and goal width " + std::to_string(p.goal_dim));
  }
  GaussianBatch g = split_gaussian_output(p.planner.forward(concat_cols({&state, &goal}), tape));
  for (std::size_t k = 0; k < g.mean.size(); ++k) g.mean[k] += state[k];
  return g;
}

inline GaussianBatch inverse_dynamics_distribution(const DecoupledPolicy& p, const Tensor& state,
                                                   const Tensor& next_state,
                                                   MlpTape* tape = nullptr) {
  if (state.cols() != p.state_dim || next_state.cols() != p.state_dim) {
    throw ShapeError("inverse dynamics: expected state width " + std::to_string(p.state_dim));
  }
  return split_gaussian_output(p.inverse_dynamics.forward(concat_cols({&state, &next_state}), tape));
}

inline Tensor squash(const Tensor& u) {
  Tensor a = u;
  for (double& x : a.values()) x = std::tanh(x);
  return a;
}

struct PolicyOutput {
  Tensor action;
  Tensor planned_next_state;
};

// s' = h(noise_planner; s, g), a = tanh(I-sample(noise_action; s, s')).
// Zero noises give the deterministic composite of the two means.
inline PolicyOutput policy_action(const DecoupledPolicy& p, const Tensor& state, const Tensor& goal,
                                  const Tensor& noise_planner, const Tensor& noise_action) {
  const bool single = state.rank() == 1;
  const Tensor s = as_batch(state);
  const Tensor g = as_batch(goal);
  const Tensor np = as_batch(noise_planner);
  const Tensor na = as_batch(noise_action);
  if (np.cols() != p.state_dim || na.cols() != p.action_dim) {
    throw ShapeError("policy_action: noise widths must be " + std::to_string(p.state_dim) +
                     " and " + std::to_string(p.action_dim));
  }
  Tensor planned = gaussian_sample_batch(planner_distribution(p, s, g), np);
  Tensor action = squash(gaussian_sample_batch(inverse_dynamics_distribution(p, s, planned), na));
  if (single) {
    return {Tensor::vector(std::move(action.values())), Tensor::vector(std::move(planned.values()))};
  }
  return {std::move(action), std::move(planned)};
}

// Monolithic goal-conditioned actor used by the HER baseline.
struct BaselinePolicy {
  Net actor;
  std::size_t obs_dim = 0;
  std::size_t goal_dim = 0;
  std::size_t action_dim = 0;

  static BaselinePolicy create(const InputLayout& in, std::size_t action_dim, std::size_t hidden,
                               Rng& rng) {
    BaselinePolicy p;
    p.obs_dim = in.obs.dim();
    p.goal_dim = in.goal.dim();
    p.action_dim = action_dim;
    p.actor = Net::create(concat_affine({in.obs, in.goal}), hidden_layers(hidden), 2 * action_dim,
                          rng, goal_offset_features(p.obs_dim, in.goal_in_obs));
    return p;
  }

  bool operator==(const BaselinePolicy&) const = default;
};

inline GaussianBatch baseline_distribution(const BaselinePolicy& p, const Tensor& obs,
                                           const Tensor& goal, MlpTape* tape = nullptr) {
  if (obs.cols() != p.obs_dim || goal.cols() != p.goal_dim) {
    throw ShapeError("baseline policy: expected obs width " + std::to_string(p.obs_dim) +
                     " and goal width " + std::to_string(p.goal_dim));
  }
  return split_gaussian_output(p.actor.forward(concat_cols({&obs, &goal}), tape));
}

// Deterministic action tanh(mean).
inline Tensor baseline_action(const BaselinePolicy& p, const Tensor& obs, const Tensor& goal) {
  const bool single = obs.rank() == 1;
  Tensor a = squash(baseline_distribution(p, as_batch(obs), as_batch(goal)).mean);
  return single ? Tensor::vector(std::move(a.values())) : a;
}

// Transitions as column-stacked tensors.
struct Batch {
  Tensor obs;
  Tensor action;
  Tensor next_obs;
  Tensor goal;
  Tensor reward;  // [B, 1]
  Tensor done;    // [B, 1]

  std::size_t size() const { return obs.rows(); }
};

inline Batch make_batch(const std::vector<Transition>& ts) {
  if (ts.empty()) throw StateError("make_batch: no transitions");
  const std::size_t b = ts.size();
  Batch out{Tensor::matrix(b, ts[0].state.size()), Tensor::matrix(b, ts[0].action.size()),
            Tensor::matrix(b, ts[0].next_state.size()), Tensor::matrix(b, ts[0].desired_goal.size()),
            Tensor::matrix(b, 1), Tensor::matrix(b, 1)};
  for (std::size_t r = 0; r < b; ++r) {
    std::copy(ts[r].state.begin(), ts[r].state.end(), out.obs.row(r).begin());
    std::copy(ts[r].action.begin(), ts[r].action.end(), out.action.row(r).begin());
    std::copy(ts[r].next_state.begin(), ts[r].next_state.end(), out.next_obs.row(r).begin());
    std::copy(ts[r].desired_goal.begin(), ts[r].desired_goal.end(), out.goal.row(r).begin());
    out.reward(r, 0) = ts[r].reward;
    out.done(r, 0) = ts[r].done ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace pilot
