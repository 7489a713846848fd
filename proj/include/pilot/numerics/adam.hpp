#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pilot/error.hpp"

namespace pilot {

struct OptimState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  OptimState() = default;
  OptimState(std::size_t num_params, double lr)
      : first_moment(num_params, 0.0), second_moment(num_params, 0.0), learning_rate(lr) {}
};

// One bias-corrected Adam step minimising the loss whose gradient is `grads`.
inline void optim_step(OptimState& state, std::span<double> params, std::span<const double> grads) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("optim_step: params (" + std::to_string(params.size()) + "), grads (" +
                     std::to_string(grads.size()) + ") and moments (" +
                     std::to_string(state.first_moment.size()) + ") disagree");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    params[i] -= state.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
  }
}

}  // namespace pilot
