#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pilot/error.hpp"

namespace pilot {

struct GoalSpaceSpec {
  std::size_t goal_dim = 2;
  double success_threshold = 1.0;  // epsilon, distance units
  std::string phi = "position";
};

inline double goal_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("goal_distance: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

// 1 if the achieved goal lies within epsilon of the desired goal, else 0.
inline double sparse_reward(std::span<const double> achieved_goal,
                            std::span<const double> desired_goal, const GoalSpaceSpec& spec) {
  if (desired_goal.size() != spec.goal_dim) {
    throw ShapeError("sparse_reward: goal has " + std::to_string(desired_goal.size()) +
                     " entries, goal space has " + std::to_string(spec.goal_dim));
  }
  return goal_distance(achieved_goal, desired_goal) <= spec.success_threshold ? 1.0 : 0.0;
}

}  // namespace pilot
