#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pilot/numerics/tensor.hpp"

namespace pilot {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// Diagonal Gaussian. log_std is kept inside [kLogStdMin, kLogStdMax].
struct GaussianHead {
  std::vector<double> mean;
  std::vector<double> log_std;

  static GaussianHead make(std::vector<double> mean, std::vector<double> log_std) {
    if (mean.size() != log_std.size()) {
      throw ShapeError("GaussianHead: mean has " + std::to_string(mean.size()) +
                       " entries, log_std has " + std::to_string(log_std.size()));
    }
    for (double& s : log_std) s = std::clamp(s, kLogStdMin, kLogStdMax);
    return {std::move(mean), std::move(log_std)};
  }

  std::size_t dim() const { return mean.size(); }
};

// mean + exp(log_std) * noise. noise == 0 returns the mean bit-exactly.
inline Tensor gaussian_sample(const GaussianHead& head, const Tensor& noise) {
  if (noise.size() != head.dim()) {
    throw ShapeError("gaussian_sample: noise length " + std::to_string(noise.size()) +
                     " != head dimension " + std::to_string(head.dim()));
  }
  std::vector<double> out(head.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = noise[i] == 0.0 ? head.mean[i] : head.mean[i] + std::exp(head.log_std[i]) * noise[i];
  }
  return Tensor::vector(std::move(out));
}

inline double gaussian_log_prob(const GaussianHead& head, const Tensor& value) {
  if (value.size() != head.dim()) {
    throw ShapeError("gaussian_log_prob: value length " + std::to_string(value.size()) +
                     " != head dimension " + std::to_string(head.dim()));
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < head.dim(); ++i) {
    const double z = (value[i] - head.mean[i]) * std::exp(-head.log_std[i]);
    lp += -0.5 * z * z - head.log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

// Batched heads produced by a network whose output is [mean | raw_log_std].
// The raw half is squashed smoothly into the log_std bounds:
//   log_std = min + (max - min) * (tanh(raw) + 1) / 2.
struct GaussianBatch {
  Tensor mean;
  Tensor log_std;
  Tensor squash_slope;  // d log_std / d raw

  std::size_t dim() const { return mean.cols(); }
  std::size_t rows() const { return mean.rows(); }

  GaussianHead head(std::size_t r) const {
    auto m = mean.row(r);
    auto s = log_std.row(r);
    return {{m.begin(), m.end()}, {s.begin(), s.end()}};
  }
};

inline GaussianBatch split_gaussian_output(const Tensor& net_out) {
  if (net_out.cols() % 2 != 0) {
    throw ShapeError("split_gaussian_output: odd output width " + shape_string(net_out.shape()));
  }
  const std::size_t d = net_out.cols() / 2;
  const std::size_t b = net_out.rows();
  GaussianBatch g{Tensor::matrix(b, d), Tensor::matrix(b, d), Tensor::matrix(b, d)};
  constexpr double half_range = 0.5 * (kLogStdMax - kLogStdMin);
  for (std::size_t r = 0; r < b; ++r) {
    auto row = net_out.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      g.mean(r, i) = row[i];
      const double t = std::tanh(row[d + i]);
      g.log_std(r, i) = kLogStdMin + half_range * (t + 1.0);
      g.squash_slope(r, i) = half_range * (1.0 - t * t);
    }
  }
  return g;
}

// Gradient with respect to the raw network output given gradients with
// respect to mean and log_std.
inline Tensor gaussian_output_grad(const GaussianBatch& g, const Tensor& d_mean,
                                   const Tensor& d_log_std) {
  const std::size_t d = g.dim();
  Tensor out = Tensor::matrix(g.rows(), 2 * d);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      out(r, i) = d_mean.empty() ? 0.0 : d_mean(r, i);
      out(r, d + i) = d_log_std.empty() ? 0.0 : d_log_std(r, i) * g.squash_slope(r, i);
    }
  }
  return out;
}

// Reparameterised sample mean + exp(log_std) * noise for every row.
inline Tensor gaussian_sample_batch(const GaussianBatch& g, const Tensor& noise) {
  if (noise.rows() != g.rows() || noise.cols() != g.dim()) {
    throw ShapeError("gaussian_sample_batch: noise shape " + shape_string(noise.shape()));
  }
  Tensor out = g.mean;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (noise[k] != 0.0) out[k] += std::exp(g.log_std[k]) * noise[k];
  }
  return out;
}

struct LogProbGrad {
  std::vector<double> log_prob;  // one per row
  Tensor d_mean;
  Tensor d_log_std;
  Tensor d_value;
};

inline LogProbGrad gaussian_log_prob_batch(const GaussianBatch& g, const Tensor& value) {
  if (value.rows() != g.rows() || value.cols() != g.dim()) {
    throw ShapeError("gaussian_log_prob_batch: value shape " + shape_string(value.shape()));
  }
  LogProbGrad out{std::vector<double>(g.rows(), 0.0), Tensor::matrix(g.rows(), g.dim()),
                  Tensor::matrix(g.rows(), g.dim()), Tensor::matrix(g.rows(), g.dim())};
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t i = 0; i < g.dim(); ++i) {
      const double inv_std = std::exp(-g.log_std(r, i));
      const double z = (value(r, i) - g.mean(r, i)) * inv_std;
      out.log_prob[r] += -0.5 * z * z - g.log_std(r, i) - kHalfLog2Pi;
      out.d_mean(r, i) = z * inv_std;
      out.d_value(r, i) = -z * inv_std;
      out.d_log_std(r, i) = z * z - 1.0;
    }
  }
  return out;
}

}  // namespace pilot
