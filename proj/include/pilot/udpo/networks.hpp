#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pilot/envs/point_mass.hpp"
#include "pilot/numerics/mlp.hpp"
#include "pilot/numerics/tensor.hpp"

namespace pilot {

inline bool operator==(const Affine& a, const Affine& b) {
  return a.offset == b.offset && a.scale == b.scale;
}

inline Affine identity_affine(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

inline Affine concat_affine(std::initializer_list<Affine> parts) {
  Affine out;
  for (const Affine& p : parts) {
    out.offset.insert(out.offset.end(), p.offset.begin(), p.offset.end());
    out.scale.insert(out.scale.end(), p.scale.begin(), p.scale.end());
  }
  return out;
}

inline Tensor apply_affine(const Tensor& x, const Affine& a) {
  if (x.cols() != a.dim()) {
    throw ShapeError("input normalizer expects width " + std::to_string(a.dim()) + ", got " +
                     shape_string(x.shape()));
  }
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - a.offset[c]) * a.scale[c];
  }
  return out;
}

// Extra input feature (x[plus] - x[minus]) * scale computed from the raw input.
struct DiffFeature {
  std::uint32_t plus = 0;
  std::uint32_t minus = 0;
  double scale = 1.0;

  bool operator==(const DiffFeature&) const = default;
};

// An MLP with a fixed affine normalisation of its raw input, optionally
// followed by difference features appended after the normalised columns.
struct Net {
  MlpParams params;
  Affine input;
  std::vector<DiffFeature> diffs;

  static Net create(const Affine& input, std::vector<std::size_t> hidden, std::size_t out,
                    Rng& rng, std::vector<DiffFeature> diffs = {}) {
    for (const DiffFeature& d : diffs) {
      if (d.plus >= input.dim() || d.minus >= input.dim()) {
        throw ShapeError("difference feature index outside input width " + std::to_string(input.dim()));
      }
    }
    std::vector<std::size_t> widths{input.dim() + diffs.size()};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return {MlpParams::init(std::move(widths), Activation::kTanh, rng), input, std::move(diffs)};
  }

  std::size_t raw_dim() const { return input.dim(); }

  Tensor features(const Tensor& raw) const {
    if (raw.cols() != input.dim()) {
      throw ShapeError("input normalizer expects width " + std::to_string(input.dim()) + ", got " +
                       shape_string(raw.shape()));
    }
    if (diffs.empty()) return apply_affine(raw, input);
    const std::size_t n = input.dim();
    Tensor out = Tensor::matrix(raw.rows(), n + diffs.size());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      auto x = raw.row(r);
      auto y = out.row(r);
      for (std::size_t c = 0; c < n; ++c) y[c] = (x[c] - input.offset[c]) * input.scale[c];
      for (std::size_t k = 0; k < diffs.size(); ++k) {
        y[n + k] = (x[diffs[k].plus] - x[diffs[k].minus]) * diffs[k].scale;
      }
    }
    return out;
  }

  Tensor forward(const Tensor& raw, MlpTape* tape = nullptr) const {
    return mlp_forward(params, features(raw), tape);
  }

  // Input gradient with respect to the raw (un-normalised) input.
  Tensor backward(const MlpTape& tape, const Tensor& output_grad, std::span<double> param_grad) const {
    const Tensor g = mlp_backward_into(params, tape, output_grad, param_grad);
    const std::size_t n = input.dim();
    Tensor out = Tensor::matrix(g.rows(), n);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gi = g.row(r);
      auto go = out.row(r);
      for (std::size_t c = 0; c < n; ++c) go[c] = gi[c] * input.scale[c];
      for (std::size_t k = 0; k < diffs.size(); ++k) {
        go[diffs[k].plus] += gi[n + k] * diffs[k].scale;
        go[diffs[k].minus] -= gi[n + k] * diffs[k].scale;
      }
    }
    return out;
  }

  bool operator==(const Net&) const = default;
};

// goal[k] - obs[goal_in_obs[k]] for a raw input laid out with the goal block
// starting at goal_offset.
inline std::vector<DiffFeature> goal_offset_features(std::size_t goal_offset,
                                                     const std::vector<std::size_t>& goal_in_obs,
                                                     double scale = 1.0) {
  std::vector<DiffFeature> out;
  for (std::size_t k = 0; k < goal_in_obs.size(); ++k) {
    out.push_back({static_cast<std::uint32_t>(goal_offset + k),
                   static_cast<std::uint32_t>(goal_in_obs[k]), scale});
  }
  return out;
}

// next[k] - state[k] for an input laid out as (state, next), scaled per
// dimension.
inline std::vector<DiffFeature> transition_features(const Affine& delta_norm) {
  std::vector<DiffFeature> out;
  const std::size_t n = delta_norm.dim();
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back({static_cast<std::uint32_t>(n + k), static_cast<std::uint32_t>(k),
                   delta_norm.scale[k]});
  }
  return out;
}

inline std::vector<std::size_t> hidden_layers(std::size_t width, std::size_t depth = 2) {
  return std::vector<std::size_t>(depth, width);
}

// Stable atanh for squashed actions; values are pulled inside (-1, 1).
inline double atanh_clipped(double a, double limit = 0.995) {
  return std::atanh(std::clamp(a, -limit, limit));
}

}  // namespace pilot
