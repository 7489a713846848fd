#pragma once

#include <vector>

#include "pilot/numerics/gaussian.hpp"
#include "pilot/udpo/networks.hpp"

namespace pilot {

// Goal planner f(g' | g, g^t): predicts the next achieved goal from the
// current one and the target. Mean is g + net(g, g^t).
struct GoalPlanner {
  Net net;
  std::size_t goal_dim = 0;

  static GoalPlanner create(const Affine& goal_norm, std::size_t hidden, Rng& rng) {
    GoalPlanner f;
    f.goal_dim = goal_norm.dim();
    std::vector<std::size_t> own(f.goal_dim);
    for (std::size_t k = 0; k < own.size(); ++k) own[k] = k;
    f.net = Net::create(concat_affine({goal_norm, goal_norm}), hidden_layers(hidden),
                        2 * f.goal_dim, rng, goal_offset_features(f.goal_dim, own));
    return f;
  }

  bool operator==(const GoalPlanner&) const = default;
};

inline GaussianBatch goal_planner_distribution(const GoalPlanner& f, const Tensor& goal,
                                               const Tensor& target, MlpTape* tape = nullptr) {
  if (goal.cols() != f.goal_dim || target.cols() != f.goal_dim) {
    throw ShapeError("goal planner: expected goal width " + std::to_string(f.goal_dim) + ", got " +
                     shape_string(goal.shape()) + " and " + shape_string(target.shape()));
  }
  GaussianBatch g = split_gaussian_output(f.net.forward(concat_cols({&goal, &target}), tape));
  for (std::size_t k = 0; k < g.mean.size(); ++k) g.mean[k] += goal[k];
  return g;
}

// Deterministic landmark: mean of f(. | g, g^t).
inline std::vector<double> plan_landmark(const GoalPlanner& f, std::span<const double> goal,
                                         std::span<const double> target) {
  const Tensor g = Tensor::matrix_from(1, goal.size(), goal);
  const Tensor t = Tensor::matrix_from(1, target.size(), target);
  return goal_planner_distribution(f, g, t).mean.to_vector();
}

inline Tensor plan_landmarks(const GoalPlanner& f, const Tensor& goal, const Tensor& target) {
  return goal_planner_distribution(f, goal, target).mean;
}

}  // namespace pilot
