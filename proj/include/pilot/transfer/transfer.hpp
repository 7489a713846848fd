#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <span>
#include <vector>

#include "pilot/transfer/goal_planner.hpp"
#include "pilot/udpo/train.hpp"

namespace pilot {

// ---------------------------------------------------------------------------
// Distillation of the goal planner from a state planner.

// Teacher prediction of the next observation for a batch of (obs, goal) rows.
using StatePredictor = std::function<Tensor(const Tensor& obs, const Tensor& target)>;
// Maps a batch of observations to achieved goals.
using GoalProjection = std::function<Tensor(const Tensor& obs)>;
using GoalSampler = std::function<std::vector<double>(Rng&)>;

inline StatePredictor planner_mean_teacher(const DecoupledPolicy& p) {
  return [&p](const Tensor& obs, const Tensor& target) {
    return planner_distribution(p, obs, target).mean;
  };
}

inline GoalProjection position_projection(std::size_t goal_dim = 2) {
  return [goal_dim](const Tensor& obs) { return slice_cols(obs, 0, goal_dim); };
}

struct DistillConfig {
  std::size_t steps = 20000;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t hidden = 64;
  std::size_t holdout = 500;
  // Teacher planner steps per label; the landmark is phi after `horizon`
  // chained mean predictions.
  std::size_t horizon = 4;
};

struct DistillResult {
  GoalPlanner planner;
  double heldout_nll = 0.0;
  double heldout_mean_error = 0.0;  // mean |f mean - phi(teacher)| over held-out rows
};

struct DistillData {
  Tensor goal;    // phi(s)
  Tensor target;  // g^t
  Tensor next;    // phi(teacher(s, g^t))
};

inline DistillData distill_batch(const StatePredictor& teacher, const GoalProjection& phi,
                                 const ReplayBuffer& buffer, const GoalSampler& sampler,
                                 std::size_t n, Rng& rng, std::size_t horizon = 1) {
  if (horizon == 0) throw InputError("distill_batch: horizon must be >= 1");
  const Batch b = make_batch(buffer.sample_batch(n, RelabelSpec::none(), rng));
  DistillData d{phi(b.obs), Tensor::matrix(n, b.goal.cols()), Tensor()};
  for (std::size_t r = 0; r < n; ++r) {
    const std::vector<double> g = sampler(rng);
    std::copy(g.begin(), g.end(), d.target.row(r).begin());
  }
  Tensor s = teacher(b.obs, d.target);
  for (std::size_t k = 1; k < horizon; ++k) s = teacher(s, d.target);
  d.next = phi(s);
  return d;
}

struct DistillEval {
  double nll = 0.0;
  double mean_error = 0.0;
};

inline DistillEval distill_evaluate(const GoalPlanner& f, const DistillData& d) {
  const GaussianBatch dist = goal_planner_distribution(f, d.goal, d.target);
  const LogProbGrad lp = gaussian_log_prob_batch(dist, d.next);
  DistillEval e;
  const double n = static_cast<double>(d.goal.rows());
  for (std::size_t r = 0; r < d.goal.rows(); ++r) {
    e.nll -= lp.log_prob[r] / n;
    double sq = 0.0;
    for (std::size_t c = 0; c < d.next.cols(); ++c) {
      const double diff = dist.mean(r, c) - d.next(r, c);
      sq += diff * diff;
    }
    e.mean_error += std::sqrt(sq) / n;
  }
  return e;
}

// One MLE step of f towards the teacher's projected predictions.
inline double distill_step(GoalPlanner& f, OptimState& optim, const DistillData& d) {
  MlpTape tape;
  const GaussianBatch dist = goal_planner_distribution(f, d.goal, d.target, &tape);
  const LogProbGrad lp = gaussian_log_prob_batch(dist, d.next);
  const double n = static_cast<double>(d.goal.rows());
  double nll = 0.0;
  for (double v : lp.log_prob) nll -= v / n;
  Tensor dm = lp.d_mean;
  Tensor ds = lp.d_log_std;
  for (double& x : dm.values()) x /= n;  // descent on nll = ascent on log-prob
  for (double& x : ds.values()) x /= n;
  std::vector<double> grad(f.net.params.size(), 0.0);
  f.net.backward(tape, gaussian_output_grad(dist, dm, ds), grad);
  for (double& x : grad) x = -x;
  optim_step(optim, f.net.params.values(), grad);
  return nll;
}

// Post-hoc distillation: states come from the pre-training buffer, targets
// from the goal sampler, and the teacher's mean prediction is the label.
inline DistillResult distill_goal_planner(const StatePredictor& teacher, const ReplayBuffer& buffer,
                                          const GoalProjection& phi, const GoalSampler& sampler,
                                          const Affine& goal_norm, const DistillConfig& cfg,
                                          std::uint64_t seed) {
  if (!teacher) throw ContractError("distill_goal_planner: no teacher state planner");
  if (!phi || !sampler) throw ContractError("distill_goal_planner: goal projection and sampler required");
  if (buffer.empty()) throw StateError("distill_goal_planner: buffer is empty");
  Rng init(derive_seed(seed, 10));
  Rng rng(derive_seed(seed, 11));
  Rng held(derive_seed(seed, 12));
  DistillResult out{GoalPlanner::create(goal_norm, cfg.hidden, init), 0.0, 0.0};
  const DistillData holdout =
      distill_batch(teacher, phi, buffer, sampler, cfg.holdout, held, cfg.horizon);
  OptimState optim(out.planner.net.params.size(), cfg.learning_rate);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    distill_step(out.planner, optim,
                 distill_batch(teacher, phi, buffer, sampler, cfg.batch_size, rng, cfg.horizon));
  }
  const DistillEval e = distill_evaluate(out.planner, holdout);
  out.heldout_nll = e.nll;
  out.heldout_mean_error = e.mean_error;
  return out;
}

// ---------------------------------------------------------------------------
// Landmark bonus.

namespace detail {
inline std::atomic<std::uint64_t>& degenerate_goal_events() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}
}  // namespace detail

inline std::uint64_t degenerate_goal_event_count() { return detail::degenerate_goal_events().load(); }

// Cosine similarity of the achieved goal and the planned landmark. A vector
// with norm below 1e-12 yields 0; the event is counted and the first one logged.
inline double bonus_reward(std::span<const double> achieved, std::span<const double> landmark) {
  if (achieved.size() != landmark.size()) {
    throw ShapeError("bonus_reward: goal widths " + std::to_string(achieved.size()) + " and " +
                     std::to_string(landmark.size()));
  }
  double dot = 0.0, na = 0.0, nl = 0.0;
  for (std::size_t i = 0; i < achieved.size(); ++i) {
    dot += achieved[i] * landmark[i];
    na += achieved[i] * achieved[i];
    nl += landmark[i] * landmark[i];
  }
  na = std::sqrt(na);
  nl = std::sqrt(nl);
  if (na < 1e-12 || nl < 1e-12) {
    if (detail::degenerate_goal_events().fetch_add(1) == 0) {
      std::clog << "pilot: degenerate goal vector in landmark bonus, returning 0\n";
    }
    return 0.0;
  }
  return std::clamp(dot / (na * nl), -1.0, 1.0);
}

// Coordinate frame the cosine is taken in. kRaw compares the achieved goal
// and landmark as given; kRelative measures both from the goal achieved
// before the step, so the bonus scores the direction of motion.
enum class BonusFrame { kRaw, kRelative };

inline const char* bonus_frame_name(BonusFrame f) { return f == BonusFrame::kRaw ? "raw" : "relative"; }

struct BonusConfig {
  double beta = 1.0;
  BonusFrame frame = BonusFrame::kRelative;
};

inline double framed_bonus(std::span<const double> previous, std::span<const double> achieved,
                           std::span<const double> landmark, BonusFrame frame) {
  if (frame == BonusFrame::kRaw) return bonus_reward(achieved, landmark);
  std::vector<double> a(achieved.size()), l(landmark.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = achieved[i] - previous[i];
    l[i] = landmark[i] - previous[i];
  }
  return bonus_reward(a, l);
}

// Environment adaptor adding beta * bonus to the sparse reward. The landmark
// is the goal planner's mean prediction from the goal achieved before the
// step. Success and the sparse reward are left untouched.
template <class Env>
class BonusEnv {
 public:
  BonusEnv(Env env, const GoalPlanner& planner, BonusConfig bonus)
      : env_(std::move(env)), planner_(&planner), bonus_(bonus) {
    if (bonus_.beta < 0.0) throw InputError("bonus beta must be >= 0");
    if (planner.goal_dim != env_.goal_dim()) {
      throw ContractError("wrap_env_with_bonus: goal planner width " + std::to_string(planner.goal_dim) +
                          " does not match environment goal width " + std::to_string(env_.goal_dim()));
    }
  }

  const Env& inner() const { return env_; }
  const BonusConfig& bonus() const { return bonus_; }
  std::string name() const { return env_.name(); }
  const GoalSpaceSpec& goal_space() const { return env_.goal_space(); }
  int episode_length() const { return env_.episode_length(); }
  std::size_t state_dim() const { return env_.state_dim(); }
  std::size_t obs_dim() const { return env_.obs_dim(); }
  std::size_t action_dim() const { return env_.action_dim(); }
  std::size_t goal_dim() const { return env_.goal_dim(); }
  Affine observation_normalizer() const { return env_.observation_normalizer(); }
  Affine goal_normalizer() const { return env_.goal_normalizer(); }
  InputLayout input_layout() const { return env_.input_layout(); }
  std::pair<double, double> reward_bounds() const {
    const auto [lo, hi] = env_.reward_bounds();
    return {lo - bonus_.beta, hi + bonus_.beta};
  }

  template <class State>
  std::vector<double> phi(const State& s) const { return env_.phi(s); }
  template <class State>
  std::vector<double> observe(const State& s) const { return env_.observe(s); }
  auto reset(Rng& rng) const { return env_.reset(rng); }

  template <class State>
  StepResult step(const State& s, std::span<const double> action,
                  std::span<const double> desired_goal) const {
    StepResult r = env_.step(s, action, desired_goal);
    if (bonus_.beta != 0.0) {
      const std::vector<double> g = env_.phi(s);
      const std::vector<double> landmark = plan_landmark(*planner_, g, desired_goal);
      r.reward = r.sparse_reward + bonus_.beta * framed_bonus(g, r.achieved_goal, landmark, bonus_.frame);
    }
    return r;
  }

  // Relabelled transitions get sparse reward plus the bonus recomputed
  // against the new desired goal.
  RelabelSpec relabel_spec(double future_fraction) const {
    RelabelSpec spec = env_.relabel_spec(future_fraction);
    if (bonus_.beta == 0.0) return spec;
    const GoalPlanner* f = planner_;
    const BonusConfig bonus = bonus_;
    const GoalSpaceSpec space = env_.goal_space();
    spec.batch_reward_fn = [f, bonus, space](std::span<Transition* const> ts) {
      if (ts.empty()) return;
      const std::size_t d = f->goal_dim;
      Tensor g = Tensor::matrix(ts.size(), d);
      Tensor t = Tensor::matrix(ts.size(), d);
      for (std::size_t r = 0; r < ts.size(); ++r) {
        std::copy(ts[r]->state_goal.begin(), ts[r]->state_goal.end(), g.row(r).begin());
        std::copy(ts[r]->desired_goal.begin(), ts[r]->desired_goal.end(), t.row(r).begin());
      }
      const Tensor landmarks = plan_landmarks(*f, g, t);
      for (std::size_t r = 0; r < ts.size(); ++r) {
        Transition& tr = *ts[r];
        tr.reward = sparse_reward(tr.achieved_goal, tr.desired_goal, space) +
                    bonus.beta * framed_bonus(tr.state_goal, tr.achieved_goal, landmarks.row(r), bonus.frame);
      }
    };
    return spec;
  }

 private:
  Env env_;
  const GoalPlanner* planner_;
  BonusConfig bonus_;
};

template <class Env>
BonusEnv<Env> wrap_env_with_bonus(Env env, const GoalPlanner& planner, BonusConfig bonus) {
  return BonusEnv<Env>(std::move(env), planner, bonus);
}

// ---------------------------------------------------------------------------
// Few-shot reuse of a frozen state planner in a new action space.

struct TransferLearner {
  DecoupledPolicy policy;
  OptimState id_optim;
  TrainConfig cfg;
  double last_id_loss = 0.0;

  Decision act(const std::vector<double>& obs, const std::vector<double>& goal, bool exploring,
               Rng& rng) const {
    return decoupled_act(policy, cfg, obs, goal, exploring, rng);
  }

  UpdateStats update(const ReplayBuffer& buffer, const RelabelSpec&, Rng& rng) {
    std::vector<double> grad;
    const Batch batch = make_batch(buffer.sample_batch(cfg.batch_size, RelabelSpec::none(), rng));
    last_id_loss = inverse_dynamics_loss(policy, batch, &grad);
    optim_step(id_optim, policy.inverse_dynamics.params.values(), grad);
    return {0.0, last_id_loss};
  }
};

struct TransferResult {
  DecoupledPolicy policy;
  TrainMetrics metrics;
};

// Copies the source planner, attaches fresh inverse dynamics for the target
// action space and trains only the inverse dynamics on target experience.
template <class Env>
TransferResult transfer_state_planner(const DecoupledPolicy& source, const Env& env,
                                      const TrainConfig& cfg, std::uint64_t seed,
                                      const EvalCallback& on_eval = {}) {
  if (source.state_dim != env.obs_dim() || source.goal_dim != env.goal_dim()) {
    throw ContractError("transfer_state_planner: source planner expects state width " +
                        std::to_string(source.state_dim) + " and goal width " +
                        std::to_string(source.goal_dim) + ", target has " +
                        std::to_string(env.obs_dim()) + " and " + std::to_string(env.goal_dim()));
  }
  Rng init(derive_seed(seed, 0));
  TransferLearner learner{source.with_new_inverse_dynamics(env.action_dim(), cfg.hidden, init),
                          OptimState(0, cfg.lr_inverse), cfg};
  learner.id_optim = OptimState(learner.policy.inverse_dynamics.params.size(), cfg.lr_inverse);
  ReplayBuffer buffer(cfg.buffer_capacity, env.goal_space());
  TrainMetrics m = train_loop(env, learner, buffer, cfg, seed, on_eval);
  return {std::move(learner.policy), std::move(m)};
}

// ---------------------------------------------------------------------------
// Zero-shot landmark following.

using Controller = std::function<std::vector<double>(const std::vector<double>& obs,
                                                     const std::vector<double>& goal)>;

inline Controller baseline_controller(const BaselinePolicy& p) {
  return [&p](const std::vector<double>& obs, const std::vector<double>& goal) {
    return baseline_action(p, Tensor::vector(obs), Tensor::vector(goal)).to_vector();
  };
}

inline Controller decoupled_controller(const DecoupledPolicy& p) {
  return [&p](const std::vector<double>& obs, const std::vector<double>& goal) {
    const Tensor np = Tensor::vector(std::vector<double>(p.state_dim, 0.0));
    const Tensor na = Tensor::vector(std::vector<double>(p.action_dim, 0.0));
    return policy_action(p, Tensor::vector(obs), Tensor::vector(goal), np, na).action.to_vector();
  };
}

struct LandmarkExecutor {
  const GoalPlanner* planner = nullptr;  // null: feed the final goal directly
  Controller controller;
  int replan_every = 1;
};

struct ZeroShotResult {
  std::vector<EnvState> trajectory;
  std::vector<std::vector<double>> landmarks;
  bool success = false;
};

template <class Env>
ZeroShotResult zero_shot_rollout(const LandmarkExecutor& ex, const Env& env, std::uint64_t seed) {
  if (ex.replan_every < 1) throw InputError("zero_shot_rollout: replan_every must be >= 1");
  if (!ex.controller) throw ContractError("zero_shot_rollout: no controller");
  if (ex.planner && ex.planner->goal_dim != env.goal_dim()) {
    throw ContractError("zero_shot_rollout: goal planner width " + std::to_string(ex.planner->goal_dim) +
                        " does not match environment goal width " + std::to_string(env.goal_dim()));
  }
  Rng rng(seed);
  auto [state, goal] = env.reset(rng);
  ZeroShotResult out;
  out.trajectory.push_back(state);
  std::vector<double> landmark = goal;
  for (int t = 0; t < env.episode_length(); ++t) {
    if (ex.planner && t % ex.replan_every == 0) landmark = plan_landmark(*ex.planner, env.phi(state), goal);
    out.landmarks.push_back(landmark);
    const StepResult r = env.step(state, ex.controller(env.observe(state), landmark), goal);
    state = r.next_state;
    out.trajectory.push_back(state);
    out.success = out.success || r.success;
    if (r.done) break;
  }
  return out;
}

inline std::uint64_t param_checksum(std::span<const double> v) {
  // Order-sensitive FNV-1a over the raw bits.
  std::uint64_t h = 1469598103934665603ull;
  for (double d : v) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace pilot
