#pragma once

#include <algorithm>
#include <vector>

#include "pilot/numerics/adam.hpp"
#include "pilot/udpo/policy.hpp"

namespace pilot {

// Differentiable action-value used by the planner and actor updates.
class ActionValue {
 public:
  virtual ~ActionValue() = default;
  // Q(obs, action, goal), shape [B, 1].
  virtual Tensor value(const Tensor& obs, const Tensor& action, const Tensor& goal) const = 0;
  // d/d action of sum_b weight_b * Q_b, shape [B, action_dim].
  virtual Tensor action_grad(const Tensor& obs, const Tensor& action, const Tensor& goal,
                             const Tensor& weight) const = 0;
};

// Twin action-value networks with Polyak-averaged targets.
struct Critic {
  Net q1;
  Net q2;
  Net q1_target;
  Net q2_target;
  double tau = 0.005;
  std::size_t action_dim = 0;

  static Critic create(const InputLayout& layout, std::size_t action_dim, std::size_t hidden,
                       Rng& rng) {
    const Affine in = concat_affine({layout.obs, identity_affine(action_dim), layout.goal});
    const auto diffs = goal_offset_features(layout.obs.dim() + action_dim, layout.goal_in_obs);
    Critic c;
    c.action_dim = action_dim;
    c.q1 = Net::create(in, hidden_layers(hidden), 1, rng, diffs);
    c.q2 = Net::create(in, hidden_layers(hidden), 1, rng, diffs);
    c.q1_target = c.q1;
    c.q2_target = c.q2;
    return c;
  }

  void soft_update() {
    auto blend = [this](Net& target, const Net& online) {
      auto t = target.params.values();
      auto o = online.params.values();
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
    };
    blend(q1_target, q1);
    blend(q2_target, q2);
  }

  bool operator==(const Critic&) const = default;
};

inline Tensor q_input(const Tensor& obs, const Tensor& action, const Tensor& goal) {
  return concat_cols({&obs, &action, &goal});
}

// First online critic as an ActionValue.
class CriticQ1 final : public ActionValue {
 public:
  explicit CriticQ1(const Critic& critic) : critic_(critic) {}

  Tensor value(const Tensor& obs, const Tensor& action, const Tensor& goal) const override {
    return critic_.q1.forward(q_input(obs, action, goal));
  }

  Tensor action_grad(const Tensor& obs, const Tensor& action, const Tensor& goal,
                     const Tensor& weight) const override {
    MlpTape tape;
    critic_.q1.forward(q_input(obs, action, goal), &tape);
    Tensor d_in = critic_.q1.backward(tape, weight, {});
    return slice_cols(d_in, obs.cols(), action.cols());
  }

 private:
  const Critic& critic_;
};

struct CriticConfig {
  double gamma = 0.99;
  // TD targets are clipped to [target_min, target_max].
  double target_min = -1e9;
  double target_max = 1e9;
};

// y = r + gamma (1 - done) min(Q1', Q2')(s', a', g).
inline Tensor critic_td_target(const Critic& critic, const Batch& batch, const Tensor& next_action,
                               const CriticConfig& config) {
  const Tensor in = q_input(batch.next_obs, next_action, batch.goal);
  const Tensor t1 = critic.q1_target.forward(in);
  const Tensor t2 = critic.q2_target.forward(in);
  Tensor y = Tensor::matrix(batch.size(), 1);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double boot = std::min(t1(b, 0), t2(b, 0));
    y(b, 0) = std::clamp(batch.reward(b, 0) + config.gamma * (1.0 - batch.done(b, 0)) * boot,
                         config.target_min, config.target_max);
  }
  return y;
}

// Mean squared TD error of one critic against fixed targets, with gradient.
inline double critic_loss(const Net& q, const Batch& batch, const Tensor& target,
                          std::vector<double>* grad) {
  MlpTape tape;
  const Tensor pred = q.forward(q_input(batch.obs, batch.action, batch.goal), grad ? &tape : nullptr);
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  Tensor d = Tensor::matrix(batch.size(), 1);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double e = pred(b, 0) - target(b, 0);
    loss += e * e / n;
    d(b, 0) = 2.0 * e / n;
  }
  if (grad) {
    grad->assign(q.params.size(), 0.0);
    q.backward(tape, d, *grad);
  }
  return loss;
}

struct CriticOptim {
  OptimState q1;
  OptimState q2;

  static CriticOptim create(const Critic& c, double lr) {
    return {OptimState(c.q1.params.size(), lr), OptimState(c.q2.params.size(), lr)};
  }
};

// One gradient step on both critics followed by the soft target update.
// Returns the mean of the two TD losses.
inline double critic_update(Critic& critic, CriticOptim& optim, const Batch& batch,
                            const Tensor& next_action, const CriticConfig& config) {
  const Tensor y = critic_td_target(critic, batch, next_action, config);
  std::vector<double> g1, g2;
  const double l1 = critic_loss(critic.q1, batch, y, &g1);
  const double l2 = critic_loss(critic.q2, batch, y, &g2);
  optim_step(optim.q1, critic.q1.params.values(), g1);
  optim_step(optim.q2, critic.q2.params.values(), g2);
  critic.soft_update();
  return 0.5 * (l1 + l2);
}

}  // namespace pilot
