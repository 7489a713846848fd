#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "pilot/numerics/finite_diff.hpp"
#include "pilot/transfer/transfer.hpp"
#include "pilot/udpo/updates.hpp"

namespace pilot {

struct GradCheckResult {
  std::string name;
  std::size_t configurations = 0;
  double max_relative_error = 0.0;
};

namespace gradcheck_detail {

inline constexpr double kStep = 1e-6;
inline constexpr double kFloor = 1e-5;

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& x : t.values()) x = uniform(rng, lo, hi);
  return t;
}

inline Affine random_affine(Rng& rng, std::size_t n) {
  Affine a;
  for (std::size_t i = 0; i < n; ++i) {
    a.offset.push_back(uniform(rng, -1.0, 1.0));
    a.scale.push_back(uniform(rng, 0.5, 2.0));
  }
  return a;
}

inline InputLayout random_layout(Rng& rng, std::size_t obs_dim, std::size_t goal_dim) {
  InputLayout in{random_affine(rng, obs_dim), random_affine(rng, goal_dim), {}, random_affine(rng, obs_dim)};
  if (goal_dim <= obs_dim && uniform(rng, 0.0, 1.0) < 0.5) {
    for (std::size_t k = 0; k < goal_dim; ++k) in.goal_in_obs.push_back(k);
  }
  return in;
}

// Gradient of f with respect to the params span at its current values.
inline double compare(std::span<double> params, const std::function<double()>& f,
                      std::span<const double> analytic) {
  std::vector<double> saved(params.begin(), params.end());
  const ScalarFn g = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), params.begin());
    return f();
  };
  const std::vector<double> numeric = finite_diff_grad(g, saved, kStep);
  std::copy(saved.begin(), saved.end(), params.begin());
  return max_relative_error(analytic, numeric, kFloor);
}

inline Batch random_batch(Rng& rng, std::size_t b, std::size_t obs, std::size_t act, std::size_t goal) {
  Batch batch{random_matrix(rng, b, obs, -1.0, 1.0), random_matrix(rng, b, act, -0.95, 0.95),
              random_matrix(rng, b, obs, -1.0, 1.0), random_matrix(rng, b, goal, -1.0, 1.0),
              random_matrix(rng, b, 1, 0.0, 1.0), Tensor::matrix(b, 1)};
  return batch;
}

}  // namespace gradcheck_detail

// MLP parameter and input gradients of sum(out * weights).
inline GradCheckResult check_mlp_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"mlp_backward", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    std::vector<std::size_t> widths{pick(rng, 1, 6)};
    const std::size_t depth = pick(rng, 1, 3);
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(pick(rng, 2, 8));
    MlpParams p = MlpParams::init(widths, Activation::kTanh, rng);
    Tensor x = random_matrix(rng, pick(rng, 1, 5), widths.front(), -2.0, 2.0);
    const Tensor w = random_matrix(rng, x.rows(), widths.back(), -1.0, 1.0);
    auto f = [&] {
      const Tensor y = mlp_forward(p, x);
      double s = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) s += y[k] * w[k];
      return s;
    };
    const MlpGradients g = mlp_backward(p, x, w);
    r.max_relative_error = std::max(r.max_relative_error, compare(p.values(), f, g.params));
    r.max_relative_error = std::max(r.max_relative_error, compare(x.values(), f, g.input.values()));
  }
  return r;
}

// Gaussian log-likelihood with respect to the raw head output and the value.
inline GradCheckResult check_gaussian_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"gaussian_log_prob", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t b = pick(rng, 1, 4);
    const std::size_t d = pick(rng, 1, 5);
    // Raw log-std kept in [-1, 1] so the smallest std stays ~0.04; narrower
    // heads make central differences truncation-limited at this step.
    Tensor raw = random_matrix(rng, b, 2 * d, -1.5, 1.5);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = d; k < 2 * d; ++k) raw(i, k) = uniform(rng, -1.0, 1.0);
    }
    Tensor value = random_matrix(rng, b, d, -2.0, 2.0);
    auto f = [&] {
      const LogProbGrad lp = gaussian_log_prob_batch(split_gaussian_output(raw), value);
      double s = 0.0;
      for (double v : lp.log_prob) s += v;
      return s;
    };
    const GaussianBatch g = split_gaussian_output(raw);
    const LogProbGrad lp = gaussian_log_prob_batch(g, value);
    const Tensor d_raw = gaussian_output_grad(g, lp.d_mean, lp.d_log_std);
    r.max_relative_error = std::max(r.max_relative_error, compare(raw.values(), f, d_raw.values()));
    r.max_relative_error = std::max(r.max_relative_error, compare(value.values(), f, lp.d_value.values()));
  }
  return r;
}

// Planner objective with frozen inverse dynamics and critic.
inline GradCheckResult check_planner_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"planner_objective", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t sd = pick(rng, 2, 5), gd = pick(rng, 1, 3), ad = pick(rng, 1, 3);
    const InputLayout in = random_layout(rng, sd, gd);
    const std::size_t hidden = pick(rng, 3, 8);
    DecoupledPolicy p = DecoupledPolicy::create(in, ad, hidden, rng);
    const Critic critic = Critic::create(in, ad, hidden, rng);
    const CriticQ1 q(critic);
    const Batch batch = random_batch(rng, pick(rng, 1, 5), sd, ad, gd);
    const Tensor noise = random_matrix(rng, batch.size(), sd, -1.5, 1.5);
    const double lambda = uniform(rng, 0.0, 1.0);
    auto f = [&] { return planner_objective(p, q, batch, noise, lambda, false).objective; };
    const PlannerGradient g = planner_objective(p, q, batch, noise, lambda, true);
    r.max_relative_error = std::max(r.max_relative_error, compare(p.planner.params.values(), f, g.total));
  }
  return r;
}

inline GradCheckResult check_inverse_dynamics_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"inverse_dynamics_mle", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t sd = pick(rng, 2, 5), gd = pick(rng, 1, 3), ad = pick(rng, 1, 3);
    DecoupledPolicy p = DecoupledPolicy::create(random_layout(rng, sd, gd), ad, pick(rng, 3, 8), rng);
    const Batch batch = random_batch(rng, pick(rng, 1, 5), sd, ad, gd);
    auto f = [&] { return inverse_dynamics_loss(p, batch, nullptr); };
    std::vector<double> grad;
    inverse_dynamics_loss(p, batch, &grad);
    r.max_relative_error =
        std::max(r.max_relative_error, compare(p.inverse_dynamics.params.values(), f, grad));
  }
  return r;
}

inline GradCheckResult check_critic_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"critic_td_loss", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t sd = pick(rng, 2, 5), gd = pick(rng, 1, 3), ad = pick(rng, 1, 3);
    Critic critic = Critic::create(random_layout(rng, sd, gd), ad, pick(rng, 3, 8), rng);
    Batch batch = random_batch(rng, pick(rng, 1, 5), sd, ad, gd);
    for (double& d : batch.done.values()) d = uniform(rng, 0.0, 1.0) < 0.3 ? 1.0 : 0.0;
    const Tensor next_action = random_matrix(rng, batch.size(), ad, -1.0, 1.0);
    const Tensor y = critic_td_target(critic, batch, next_action, CriticConfig{0.99, -100.0, 100.0});
    auto f = [&] { return critic_loss(critic.q1, batch, y, nullptr); };
    std::vector<double> grad;
    critic_loss(critic.q1, batch, y, &grad);
    r.max_relative_error = std::max(r.max_relative_error, compare(critic.q1.params.values(), f, grad));
  }
  return r;
}

inline GradCheckResult check_actor_gradients(std::size_t configs, std::uint64_t seed) {
  using namespace gradcheck_detail;
  Rng rng(seed);
  GradCheckResult r{"actor_objective", configs, 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t sd = pick(rng, 2, 5), gd = pick(rng, 1, 3), ad = pick(rng, 1, 3);
    const InputLayout in = random_layout(rng, sd, gd);
    BaselinePolicy p = BaselinePolicy::create(in, ad, pick(rng, 3, 8), rng);
    const Critic critic = Critic::create(in, ad, pick(rng, 3, 8), rng);
    const CriticQ1 q(critic);
    const Batch batch = random_batch(rng, pick(rng, 1, 5), sd, ad, gd);
    const double l2 = uniform(rng, 0.0, 0.5);
    auto f = [&] { return actor_objective(p, q, batch, l2, false).objective; };
    const ActorGradient g = actor_objective(p, q, batch, l2, true);
    r.max_relative_error = std::max(r.max_relative_error, compare(p.actor.params.values(), f, g.grad));
  }
  return r;
}

inline std::vector<GradCheckResult> run_gradient_suite(std::size_t configs = 32, std::uint64_t seed = 7) {
  return {check_mlp_gradients(configs, derive_seed(seed, 1)),
          check_gaussian_gradients(configs, derive_seed(seed, 2)),
          check_planner_gradients(configs, derive_seed(seed, 3)),
          check_inverse_dynamics_gradients(configs, derive_seed(seed, 4)),
          check_critic_gradients(configs, derive_seed(seed, 5)),
          check_actor_gradients(configs, derive_seed(seed, 6))};
}

}  // namespace pilot
