#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "pilot/numerics/adam.hpp"
#include "pilot/udpo/critic.hpp"

namespace pilot {

// ---------------------------------------------------------------------------
// Inverse dynamics: maximum likelihood of buffer actions, L = -E log I(a | s, s').

inline Tensor pre_squash_actions(const Tensor& action) {
  Tensor u = action;
  for (double& x : u.values()) x = atanh_clipped(x);
  return u;
}

inline double inverse_dynamics_loss(const DecoupledPolicy& p, const Batch& batch,
                                    std::vector<double>* grad) {
  MlpTape tape;
  const GaussianBatch dist =
      inverse_dynamics_distribution(p, batch.obs, batch.next_obs, grad ? &tape : nullptr);
  const LogProbGrad lp = gaussian_log_prob_batch(dist, pre_squash_actions(batch.action));
  const double n = static_cast<double>(batch.size());
  const double loss = -std::accumulate(lp.log_prob.begin(), lp.log_prob.end(), 0.0) / n;
  if (grad) {
    Tensor dm = lp.d_mean;
    Tensor ds = lp.d_log_std;
    for (double& x : dm.values()) x *= -1.0 / n;
    for (double& x : ds.values()) x *= -1.0 / n;
    grad->assign(p.inverse_dynamics.params.size(), 0.0);
    p.inverse_dynamics.backward(tape, gaussian_output_grad(dist, dm, ds), *grad);
  }
  return loss;
}

struct Plateau {
  std::size_t window = 50;
  double min_improvement = 1e-4;
  std::size_t probe_size = 512;
};

// Runs up to `steps` Adam iterations on uniformly sampled buffer transitions.
// With a plateau rule, the loss on a fixed probe batch drawn at the start is
// measured every `window` steps and training stops once it improved by less
// than min_improvement since the previous measurement. Returns the per-step
// minibatch losses.
inline std::vector<double> train_inverse_dynamics(DecoupledPolicy& p, OptimState& optim,
                                                  const ReplayBuffer& buffer, std::size_t steps,
                                                  std::size_t batch_size, Rng& rng,
                                                  std::optional<Plateau> plateau = std::nullopt) {
  if (buffer.empty()) throw StateError("train_inverse_dynamics: buffer is empty");
  std::vector<double> trace;
  trace.reserve(steps);
  std::optional<Batch> probe;
  double probe_loss = 0.0;
  if (plateau && steps > 0) {
    probe = make_batch(buffer.sample_batch(plateau->probe_size, RelabelSpec::none(), rng));
    probe_loss = inverse_dynamics_loss(p, *probe, nullptr);
  }
  std::vector<double> grad;
  for (std::size_t k = 0; k < steps; ++k) {
    const Batch batch = make_batch(buffer.sample_batch(batch_size, RelabelSpec::none(), rng));
    trace.push_back(inverse_dynamics_loss(p, batch, &grad));
    optim_step(optim, p.inverse_dynamics.params.values(), grad);
    if (probe && trace.size() % plateau->window == 0) {
      const double now = inverse_dynamics_loss(p, *probe, nullptr);
      if (probe_loss - now < plateau->min_improvement) break;
      probe_loss = now;
    }
  }
  return trace;
}

// Tracks when inverse dynamics was last retrained, in update epochs.
struct InverseDynamicsClock {
  std::uint64_t epoch = 0;
  std::optional<std::uint64_t> last_trained;
  std::uint64_t interval = 1500;

  bool due() const { return !last_trained || epoch - *last_trained >= interval; }
  bool stale() const { return !last_trained || epoch - *last_trained > interval; }
};

// ---------------------------------------------------------------------------
// Planner objective
//   J(psi) = E[Q(s, tanh(mean I(s, s~)), g)] + lambda E[log h_psi(s' | s, g)],
//   s~ = mean h_psi(s, g) + std h_psi(s, g) * noise,
// differentiated through the frozen inverse dynamics into psi only.

struct PlannerGradient {
  double objective = 0.0;
  double q_term = 0.0;
  double mle_term = 0.0;
  std::vector<double> q_grad;    // dJ_q / dpsi
  std::vector<double> mle_grad;  // lambda * dJ_mle / dpsi
  std::vector<double> total;     // ascent direction of J

  double q_norm() const { return norm(q_grad); }
  double mle_norm() const { return norm(mle_grad); }

 private:
  static double norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
};

inline PlannerGradient planner_objective(const DecoupledPolicy& p, const ActionValue& q,
                                         const Batch& batch, const Tensor& noise, double lambda,
                                         bool with_grad) {
  const double n = static_cast<double>(batch.size());
  MlpTape plan_tape;
  const GaussianBatch plan = planner_distribution(p, batch.obs, batch.goal, &plan_tape);
  const Tensor planned = gaussian_sample_batch(plan, noise);
  MlpTape id_tape;
  const GaussianBatch inv = inverse_dynamics_distribution(p, batch.obs, planned, &id_tape);
  const Tensor action = squash(inv.mean);
  const Tensor qv = q.value(batch.obs, action, batch.goal);
  const LogProbGrad lp = gaussian_log_prob_batch(plan, batch.next_obs);

  PlannerGradient out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.q_term += qv(b, 0) / n;
    out.mle_term += lp.log_prob[b] / n;
  }
  out.objective = out.q_term + lambda * out.mle_term;
  if (!with_grad) return out;

  // Q pathway: dQ/da -> tanh -> inverse dynamics input -> reparameterised sample.
  const Tensor weight = Tensor::matrix(batch.size(), 1, 1.0 / n);
  Tensor du = q.action_grad(batch.obs, action, batch.goal, weight);
  for (std::size_t k = 0; k < du.size(); ++k) du[k] *= 1.0 - action[k] * action[k];
  const Tensor id_out_grad = gaussian_output_grad(inv, du, Tensor());
  const Tensor d_id_in = p.inverse_dynamics.backward(id_tape, id_out_grad, {});
  const Tensor d_planned = slice_cols(d_id_in, p.state_dim, p.state_dim);
  Tensor q_dlogstd = d_planned;
  for (std::size_t k = 0; k < q_dlogstd.size(); ++k) {
    q_dlogstd[k] *= std::exp(plan.log_std[k]) * noise[k];
  }
  out.q_grad.assign(p.planner.params.size(), 0.0);
  p.planner.backward(plan_tape, gaussian_output_grad(plan, d_planned, q_dlogstd), out.q_grad);

  // Legality pathway: lambda * log-likelihood of realised next states.
  Tensor dm = lp.d_mean;
  Tensor ds = lp.d_log_std;
  for (double& x : dm.values()) x *= lambda / n;
  for (double& x : ds.values()) x *= lambda / n;
  out.mle_grad.assign(p.planner.params.size(), 0.0);
  p.planner.backward(plan_tape, gaussian_output_grad(plan, dm, ds), out.mle_grad);

  out.total.resize(out.q_grad.size());
  for (std::size_t i = 0; i < out.total.size(); ++i) out.total[i] = out.q_grad[i] + out.mle_grad[i];
  return out;
}

struct PlannerStats {
  double objective = 0.0;
  double q_grad_norm = 0.0;
  double mle_grad_norm = 0.0;
};

// One Adam step on the planner parameters only.
inline PlannerStats planner_update(DecoupledPolicy& p, OptimState& optim, const ActionValue& q,
                                   const Batch& batch, double lambda,
                                   const InverseDynamicsClock& clock, Rng& rng) {
  if (clock.stale()) {
    throw ContractError("planner_update: inverse dynamics is older than the retrain interval (" +
                        std::to_string(clock.interval) + " epochs)");
  }
  Tensor noise = Tensor::matrix(batch.size(), p.state_dim);
  for (double& x : noise.values()) x = standard_normal(rng);
  PlannerGradient g = planner_objective(p, q, batch, noise, lambda, true);
  for (double& x : g.total) x = -x;
  optim_step(optim, p.planner.params.values(), g.total);
  return {g.objective, g.q_norm(), g.mle_norm()};
}

// ---------------------------------------------------------------------------
// Baseline actor: J(theta) = E[Q(s, tanh(mu), g)] - l2 * E[|mu|^2].

struct ActorGradient {
  double objective = 0.0;
  std::vector<double> grad;  // ascent direction
};

inline ActorGradient actor_objective(const BaselinePolicy& p, const ActionValue& q,
                                     const Batch& batch, double action_l2, bool with_grad) {
  const double n = static_cast<double>(batch.size());
  MlpTape tape;
  const GaussianBatch dist = baseline_distribution(p, batch.obs, batch.goal, &tape);
  const Tensor action = squash(dist.mean);
  const Tensor qv = q.value(batch.obs, action, batch.goal);
  ActorGradient out;
  for (std::size_t b = 0; b < batch.size(); ++b) out.objective += qv(b, 0) / n;
  for (double m : dist.mean.values()) out.objective -= action_l2 * m * m / n;
  if (!with_grad) return out;
  const Tensor weight = Tensor::matrix(batch.size(), 1, 1.0 / n);
  Tensor du = q.action_grad(batch.obs, action, batch.goal, weight);
  for (std::size_t k = 0; k < du.size(); ++k) {
    du[k] = du[k] * (1.0 - action[k] * action[k]) - 2.0 * action_l2 * dist.mean[k] / n;
  }
  out.grad.assign(p.actor.params.size(), 0.0);
  p.actor.backward(tape, gaussian_output_grad(dist, du, Tensor()), out.grad);
  return out;
}

inline double actor_update(BaselinePolicy& p, OptimState& optim, const ActionValue& q,
                           const Batch& batch, double action_l2) {
  ActorGradient g = actor_objective(p, q, batch, action_l2, true);
  for (double& x : g.grad) x = -x;
  optim_step(optim, p.actor.params.values(), g.grad);
  return g.objective;
}

}  // namespace pilot
