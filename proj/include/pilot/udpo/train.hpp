#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pilot/envs/point_mass.hpp"
#include "pilot/udpo/updates.hpp"

namespace pilot {

struct TrainConfig {
  double gamma = 0.99;
  double lambda = 1e-2;        // planner legality coefficient
  std::uint64_t delta = 1500;  // inverse dynamics retrain interval, in update epochs
  double lr_critic = 3e-4;
  double lr_policy = 3e-4;
  double lr_inverse = 1e-3;
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = 100000;
  std::size_t hidden = 128;
  double tau = 0.005;
  double future_fraction = 0.8;
  double explore_sigma = 0.2;   // additive Gaussian noise on emitted actions
  double random_eps = 0.3;      // probability of a uniformly random action
  double planner_noise = 0.2;   // scale of the planner-head noise while collecting
  double action_l2 = 0.0;       // baseline actor pre-squash penalty
  std::size_t total_env_steps = 100000;
  std::size_t warmup_steps = 1000;
  double updates_per_step = 0.25;
  std::size_t eval_interval = 5000;
  std::size_t eval_episodes = 50;
  std::size_t id_budget = 500;  // retrain steps per round
  Plateau id_plateau{};
  // Stop once an evaluation reaches this success rate (disabled when unset).
  std::optional<double> stop_at_success;
};

struct EvalRecord {
  std::size_t env_steps = 0;
  double success_rate = 0.0;
  double planner_pred_mse = 0.0;
  double inverse_dyn_loss = 0.0;
  double critic_loss = 0.0;
  double bonus_mean = 0.0;
  double wallclock_seconds = 0.0;
};

struct TrainMetrics {
  std::vector<EvalRecord> evals;
  std::size_t env_steps = 0;
  std::uint64_t update_epochs = 0;

  // First evaluated step count whose success rate reaches `threshold`.
  std::optional<std::size_t> steps_to_success(double threshold) const {
    for (const EvalRecord& e : evals) {
      if (e.success_rate >= threshold) return e.env_steps;
    }
    return std::nullopt;
  }
  double best_success(std::size_t within_steps) const {
    double best = 0.0;
    for (const EvalRecord& e : evals) {
      if (e.env_steps <= within_steps) best = std::max(best, e.success_rate);
    }
    return best;
  }
  double final_success() const { return evals.empty() ? 0.0 : evals.back().success_rate; }
};

using EvalCallback = std::function<void(const EvalRecord&)>;

// One decision: the action to execute and, for decoupled policies, the state
// the planner intends to reach.
struct Decision {
  std::vector<double> action;
  std::optional<std::vector<double>> planned;
};

struct EpisodeResult {
  std::vector<Transition> transitions;
  bool success = false;
  double bonus_sum = 0.0;
  double pred_sq_err = 0.0;
  std::size_t pred_count = 0;
};

// Rolls out one episode. `act(obs, goal)` returns the decision for the current
// observation. Transitions store done = false at the horizon: success never
// terminates these tasks, so the only episode end is a time-limit
// truncation, which the critic bootstraps through.
template <class Env, class Act>
EpisodeResult run_episode(const Env& env, Act&& act, Rng& rng, std::int64_t trajectory_id) {
  auto [state, goal] = env.reset(rng);
  EpisodeResult ep;
  ep.transitions.reserve(static_cast<std::size_t>(env.episode_length()));
  for (int t = 0; t < env.episode_length(); ++t) {
    std::vector<double> obs = env.observe(state);
    Decision d = act(obs, goal);
    StepResult r = env.step(state, d.action, goal);
    Transition tr;
    tr.state = std::move(obs);
    tr.action = d.action;
    tr.next_state = env.observe(r.next_state);
    tr.achieved_goal = r.achieved_goal;
    tr.desired_goal = goal;
    tr.state_goal = env.phi(state);
    tr.reward = r.reward;
    tr.done = false;
    tr.trajectory_id = trajectory_id;
    tr.step_index = t;
    ep.success = ep.success || r.success;
    ep.bonus_sum += r.reward - r.sparse_reward;
    if (d.planned) {
      for (std::size_t k = 0; k < d.planned->size(); ++k) {
        const double e = (*d.planned)[k] - tr.next_state[k];
        ep.pred_sq_err += e * e / static_cast<double>(d.planned->size());
      }
      ++ep.pred_count;
    }
    ep.transitions.push_back(std::move(tr));
    state = r.next_state;
    if (r.done) break;
  }
  return ep;
}

inline std::vector<double> explore(std::vector<double> action, const TrainConfig& cfg, Rng& rng) {
  if (uniform(rng, 0.0, 1.0) < cfg.random_eps) {
    for (double& a : action) a = uniform(rng, -1.0, 1.0);
    return action;
  }
  for (double& a : action) a = std::clamp(a + cfg.explore_sigma * standard_normal(rng), -1.0, 1.0);
  return action;
}

struct EvalSummary {
  double success_rate = 0.0;
  double pred_mse = 0.0;
};

// Deterministic evaluation over `episodes` episodes drawn from `seed`.
template <class Env, class Act>
EvalSummary evaluate(const Env& env, Act&& act, std::size_t episodes, std::uint64_t seed) {
  Rng rng(seed);
  EvalSummary s;
  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeResult ep = run_episode(env, act, rng, static_cast<std::int64_t>(e));
    s.success_rate += ep.success ? 1.0 : 0.0;
    err += ep.pred_sq_err;
    count += ep.pred_count;
  }
  s.success_rate /= static_cast<double>(std::max<std::size_t>(episodes, 1));
  s.pred_mse = count ? err / static_cast<double>(count) : 0.0;
  return s;
}

struct UpdateStats {
  double critic_loss = 0.0;
  double inverse_dyn_loss = 0.0;
};

// Shared collect / update / evaluate loop. Learner provides
//   Decision act(obs, goal, bool explore, Rng&) const
//   UpdateStats update(const ReplayBuffer&, const RelabelSpec&, Rng&)
template <class Env, class Learner>
TrainMetrics train_loop(const Env& env, Learner& learner, ReplayBuffer& buffer,
                        const TrainConfig& cfg, std::uint64_t seed, const EvalCallback& on_eval) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  Rng rng(derive_seed(seed, 1));
  const std::uint64_t eval_seed = derive_seed(seed, 2);
  const RelabelSpec relabel = env.relabel_spec(cfg.future_fraction);
  TrainMetrics metrics;
  UpdateStats last{};
  double update_credit = 0.0;
  double bonus_sum = 0.0;
  std::size_t bonus_steps = 0;
  std::size_t next_eval = 0;
  std::int64_t trajectory_id = 0;

  auto record = [&] {
    auto act = [&](const std::vector<double>& obs, const std::vector<double>& goal) {
      return learner.act(obs, goal, false, rng);
    };
    const EvalSummary s = evaluate(env, act, cfg.eval_episodes, eval_seed);
    EvalRecord r;
    r.env_steps = metrics.env_steps;
    r.success_rate = s.success_rate;
    r.planner_pred_mse = s.pred_mse;
    r.inverse_dyn_loss = last.inverse_dyn_loss;
    r.critic_loss = last.critic_loss;
    r.bonus_mean = bonus_steps ? bonus_sum / static_cast<double>(bonus_steps) : 0.0;
    r.wallclock_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    metrics.evals.push_back(r);
    if (on_eval) on_eval(r);
    bonus_sum = 0.0;
    bonus_steps = 0;
    return r.success_rate;
  };

  while (true) {
    if (metrics.env_steps >= next_eval) {
      const double success = record();
      next_eval += cfg.eval_interval;
      if (cfg.stop_at_success && success >= *cfg.stop_at_success) break;
    }
    if (metrics.env_steps >= cfg.total_env_steps) break;
    auto act = [&](const std::vector<double>& obs, const std::vector<double>& goal) {
      return learner.act(obs, goal, true, rng);
    };
    EpisodeResult ep = run_episode(env, act, rng, trajectory_id++);
    const std::size_t n = ep.transitions.size();
    bonus_sum += ep.bonus_sum;
    bonus_steps += n;
    buffer.push(ep.transitions);
    metrics.env_steps += n;
    if (metrics.env_steps < cfg.warmup_steps) continue;
    update_credit += static_cast<double>(n) * cfg.updates_per_step;
    while (update_credit >= 1.0) {
      last = learner.update(buffer, relabel, rng);
      ++metrics.update_epochs;
      update_credit -= 1.0;
    }
  }
  if (metrics.evals.empty() || metrics.evals.back().env_steps != metrics.env_steps) record();
  return metrics;
}

// TD targets clipped to the discounted return range implied by the reward bounds.
template <class Env>
CriticConfig td_range(const Env& env, double gamma) {
  const auto [rmin, rmax] = env.reward_bounds();
  return {gamma, std::min(0.0, rmin) / (1.0 - gamma), std::max(0.0, rmax) / (1.0 - gamma)};
}

// Decoupled policy decision. While exploring, the planner head is sampled
// with noise scaled by planner_noise and the action is perturbed by explore().
inline Decision decoupled_act(const DecoupledPolicy& policy, const TrainConfig& cfg,
                              const std::vector<double>& obs, const std::vector<double>& goal,
                              bool exploring, Rng& rng) {
  Tensor np = Tensor::vector(std::vector<double>(policy.state_dim, 0.0));
  if (exploring) {
    for (double& x : np.values()) x = cfg.planner_noise * standard_normal(rng);
  }
  const Tensor na = Tensor::vector(std::vector<double>(policy.action_dim, 0.0));
  PolicyOutput out = policy_action(policy, Tensor::vector(obs), Tensor::vector(goal), np, na);
  std::vector<double> a = out.action.to_vector();
  if (exploring) a = explore(std::move(a), cfg, rng);
  return {std::move(a), out.planned_next_state.to_vector()};
}

// ---------------------------------------------------------------------------
// UDPO: decoupled policy trained with twin critics.

struct UdpoLearner {
  DecoupledPolicy policy;
  Critic critic;
  OptimState planner_optim;
  OptimState id_optim;
  CriticOptim critic_optim;
  InverseDynamicsClock clock;
  TrainConfig cfg;
  CriticConfig critic_cfg;

  template <class Env>
  static UdpoLearner create(const Env& env, const TrainConfig& cfg, std::uint64_t seed) {
    Rng init(derive_seed(seed, 0));
    UdpoLearner l;
    l.cfg = cfg;
    l.policy = DecoupledPolicy::create(env.input_layout(), env.action_dim(), cfg.hidden, init);
    l.critic = Critic::create(env.input_layout(), env.action_dim(), cfg.hidden, init);
    l.critic.tau = cfg.tau;
    l.planner_optim = OptimState(l.policy.planner.params.size(), cfg.lr_policy);
    l.id_optim = OptimState(l.policy.inverse_dynamics.params.size(), cfg.lr_inverse);
    l.critic_optim = CriticOptim::create(l.critic, cfg.lr_critic);
    l.clock.interval = cfg.delta;
    l.critic_cfg = td_range(env, cfg.gamma);
    return l;
  }

  Decision act(const std::vector<double>& obs, const std::vector<double>& goal, bool exploring,
               Rng& rng) const {
    return decoupled_act(policy, cfg, obs, goal, exploring, rng);
  }

  UpdateStats update(const ReplayBuffer& buffer, const RelabelSpec& relabel, Rng& rng) {
    UpdateStats stats;
    if (clock.due()) {
      const auto trace = train_inverse_dynamics(policy, id_optim, buffer, cfg.id_budget,
                                                cfg.batch_size, rng, cfg.id_plateau);
      clock.last_trained = clock.epoch;
      last_id_loss = trace.empty() ? 0.0 : trace.back();
    }
    const Batch batch = make_batch(buffer.sample_batch(cfg.batch_size, relabel, rng));
    const Tensor zp = Tensor::matrix(batch.size(), policy.state_dim);
    const Tensor za = Tensor::matrix(batch.size(), policy.action_dim);
    const Tensor next_action = policy_action(policy, batch.next_obs, batch.goal, zp, za).action;
    stats.critic_loss = critic_update(critic, critic_optim, batch, next_action, critic_cfg);
    planner_update(policy, planner_optim, CriticQ1(critic), batch, cfg.lambda, clock, rng);
    ++clock.epoch;
    stats.inverse_dyn_loss = last_id_loss;
    return stats;
  }

  double last_id_loss = 0.0;
};

struct UdpoResult {
  DecoupledPolicy policy;
  Critic critic;
  ReplayBuffer buffer;
  TrainMetrics metrics;
};

template <class Env>
UdpoResult udpo_train(const Env& env, const TrainConfig& cfg, std::uint64_t seed,
                      const EvalCallback& on_eval = {}) {
  UdpoLearner learner = UdpoLearner::create(env, cfg, seed);
  ReplayBuffer buffer(cfg.buffer_capacity, env.goal_space());
  TrainMetrics m = train_loop(env, learner, buffer, cfg, seed, on_eval);
  return {std::move(learner.policy), std::move(learner.critic), std::move(buffer), std::move(m)};
}

// ---------------------------------------------------------------------------
// HER baseline: monolithic actor with deterministic policy gradient.

struct HerLearner {
  BaselinePolicy policy;
  Critic critic;
  OptimState actor_optim;
  CriticOptim critic_optim;
  TrainConfig cfg;
  CriticConfig critic_cfg;

  template <class Env>
  static HerLearner create(const Env& env, const TrainConfig& cfg, std::uint64_t seed) {
    Rng init(derive_seed(seed, 0));
    HerLearner l;
    l.cfg = cfg;
    l.policy = BaselinePolicy::create(env.input_layout(), env.action_dim(), cfg.hidden, init);
    l.critic = Critic::create(env.input_layout(), env.action_dim(), cfg.hidden, init);
    l.critic.tau = cfg.tau;
    l.actor_optim = OptimState(l.policy.actor.params.size(), cfg.lr_policy);
    l.critic_optim = CriticOptim::create(l.critic, cfg.lr_critic);
    l.critic_cfg = td_range(env, cfg.gamma);
    return l;
  }

  Decision act(const std::vector<double>& obs, const std::vector<double>& goal, bool exploring,
               Rng& rng) const {
    std::vector<double> a = baseline_action(policy, Tensor::vector(obs), Tensor::vector(goal)).to_vector();
    if (exploring) a = explore(std::move(a), cfg, rng);
    return {std::move(a), std::nullopt};
  }

  UpdateStats update(const ReplayBuffer& buffer, const RelabelSpec& relabel, Rng& rng) {
    const Batch batch = make_batch(buffer.sample_batch(cfg.batch_size, relabel, rng));
    const Tensor next_action = baseline_action(policy, batch.next_obs, batch.goal);
    UpdateStats stats;
    stats.critic_loss = critic_update(critic, critic_optim, batch, next_action, critic_cfg);
    actor_update(policy, actor_optim, CriticQ1(critic), batch, cfg.action_l2);
    return stats;
  }
};

struct HerResult {
  BaselinePolicy policy;
  Critic critic;
  TrainMetrics metrics;
};

template <class Env>
HerResult her_train(const Env& env, const TrainConfig& cfg, std::uint64_t seed,
                    const EvalCallback& on_eval = {}) {
  HerLearner learner = HerLearner::create(env, cfg, seed);
  ReplayBuffer buffer(cfg.buffer_capacity, env.goal_space());
  TrainMetrics m = train_loop(env, learner, buffer, cfg, seed, on_eval);
  return {std::move(learner.policy), std::move(learner.critic), std::move(m)};
}

}  // namespace pilot
