#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pilot/numerics/random.hpp"
#include "pilot/numerics/tensor.hpp"

namespace pilot {

enum class Activation { kTanh, kRelu };

inline const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

// Fully connected network. All layer weights and biases live in one flat
// buffer so optimizers, checkpoints and gradient checks can treat the network
// as a single parameter vector. Layer i holds W_i (out x in, row-major)
// followed by b_i (out).
class MlpParams {
 public:
  MlpParams() = default;

  MlpParams(std::vector<std::size_t> widths, Activation activation)
      : widths_(std::move(widths)), activation_(activation) {
    if (widths_.size() < 2) throw ShapeError("MlpParams needs at least one layer");
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      if (widths_[i] == 0 || widths_[i + 1] == 0) throw ShapeError("MlpParams: zero-width layer");
      offsets_.push_back(total);
      total += widths_[i + 1] * widths_[i] + widths_[i + 1];
    }
    values_.assign(total, 0.0);
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static MlpParams init(std::vector<std::size_t> widths, Activation activation, Rng& rng) {
    MlpParams p(std::move(widths), activation);
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.widths_[l]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      auto w = p.weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
      auto b = p.bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
    }
    return p;
  }

  std::size_t num_layers() const { return offsets_.size(); }
  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation activation() const { return activation_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  MatrixMap weight(std::size_t l) {
    return {values_.data() + offsets_[l], rows(l), cols(l)};
  }
  ConstMatrixMap weight(std::size_t l) const {
    return {values_.data() + offsets_[l], rows(l), cols(l)};
  }
  VectorMap bias(std::size_t l) {
    return {values_.data() + offsets_[l] + widths_[l + 1] * widths_[l], rows(l)};
  }
  ConstVectorMap bias(std::size_t l) const {
    return {values_.data() + offsets_[l] + widths_[l + 1] * widths_[l], rows(l)};
  }

  std::size_t offset(std::size_t l) const { return offsets_[l]; }

  bool same_layout(const MlpParams& o) const {
    return widths_ == o.widths_ && activation_ == o.activation_;
  }

  bool operator==(const MlpParams& o) const = default;

 private:
  Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(widths_[l + 1]); }
  Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(widths_[l]); }

  std::vector<std::size_t> widths_;
  Activation activation_ = Activation::kTanh;
  AlignedVector values_;
  std::vector<std::size_t> offsets_;
};

// Layer inputs recorded by a forward pass; layer_inputs[l] is the input to
// layer l, so layer_inputs[l + 1] is the activation output of hidden layer l.
struct MlpTape {
  std::vector<Tensor> layer_inputs;
};

namespace detail {

inline void check_input(const MlpParams& params, const Tensor& input) {
  if (input.cols() != params.in_dim()) {
    throw ShapeError("mlp layer 0: expected input width " + std::to_string(params.in_dim()) +
                     ", got " + shape_string(input.shape()));
  }
}

inline void activate(Activation a, MatrixMap z) {
  if (a == Activation::kTanh) {
    // Eigen's double tanh is scalar; this form vectorises through exp.
    z = 1.0 - 2.0 / ((2.0 * z.array().min(40.0)).exp() + 1.0);
  } else {
    z = z.array().max(0.0);
  }
}

}  // namespace detail

inline Tensor mlp_forward(const MlpParams& params, const Tensor& input, MlpTape* tape) {
  detail::check_input(params, input);
  const std::size_t batch = input.rows();
  if (tape) {
    tape->layer_inputs.clear();
    tape->layer_inputs.reserve(params.num_layers());
  }
  Tensor x = input.rank() == 2 ? input : Tensor::matrix(1, input.cols());
  if (input.rank() != 2) std::copy(input.data().begin(), input.data().end(), x.data().begin());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Tensor z = Tensor::matrix(batch, params.widths()[l + 1]);
    auto zm = z.mat();
    zm.noalias() = x.mat() * params.weight(l).transpose();
    zm.rowwise() += params.bias(l).transpose();
    if (l + 1 < params.num_layers()) detail::activate(params.activation(), zm);
    if (tape) {
      tape->layer_inputs.push_back(std::move(x));
    }
    x = std::move(z);
  }
  if (input.rank() == 1) return Tensor::vector(std::move(x.values()));
  return x;
}

inline Tensor mlp_forward(const MlpParams& params, const Tensor& input) {
  return mlp_forward(params, input, nullptr);
}

inline Tensor mlp_forward(const MlpParams& params, const Tensor& input, MlpTape& tape) {
  return mlp_forward(params, input, &tape);
}

// Reverse pass for the scalar sum(output * output_grad). Parameter gradients
// are accumulated (added) into param_grad; an empty span skips them (frozen
// networks). Returns the input gradient.
inline Tensor mlp_backward_into(const MlpParams& params, const MlpTape& tape,
                                const Tensor& output_grad, std::span<double> param_grad) {
  if (tape.layer_inputs.size() != params.num_layers()) {
    throw ShapeError("mlp_backward: tape does not match network depth");
  }
  const bool want_params = !param_grad.empty();
  if (want_params && param_grad.size() != params.size()) {
    throw ShapeError("mlp_backward: gradient buffer has wrong size");
  }
  const std::size_t batch = tape.layer_inputs.front().rows();
  if (output_grad.cols() != params.out_dim() || output_grad.rows() != batch) {
    throw ShapeError("mlp_backward: output_grad shape " + shape_string(output_grad.shape()) +
                     " does not match output [" + std::to_string(batch) + ", " +
                     std::to_string(params.out_dim()) + "]");
  }
  Tensor delta = Tensor::matrix(batch, params.out_dim());
  std::copy(output_grad.data().begin(), output_grad.data().end(), delta.data().begin());
  for (std::size_t li = params.num_layers(); li-- > 0;) {
    const Tensor& x = tape.layer_inputs[li];
    const auto rows = static_cast<Eigen::Index>(params.widths()[li + 1]);
    const auto cols = static_cast<Eigen::Index>(params.widths()[li]);
    if (want_params) {
      MatrixMap dw(param_grad.data() + params.offset(li), rows, cols);
      VectorMap db(param_grad.data() + params.offset(li) + params.widths()[li + 1] * params.widths()[li],
                   rows);
      // The caller's buffer has no alignment guarantee, so products go
      // through an aligned temporary and are added elementwise.
      Tensor w_grad = Tensor::matrix(params.widths()[li + 1], params.widths()[li]);
      w_grad.mat().noalias() = delta.mat().transpose() * x.mat();
      dw += w_grad.mat();
      for (Eigen::Index r = 0; r < delta.mat().rows(); ++r) db += delta.mat().row(r).transpose();
    }
    Tensor dx = Tensor::matrix(batch, params.widths()[li]);
    dx.mat().noalias() = delta.mat() * params.weight(li);
    if (li > 0) {
      // x is the activation output of the previous hidden layer.
      if (params.activation() == Activation::kTanh) {
        dx.mat().array() *= 1.0 - x.mat().array().square();
      } else {
        dx.mat().array() *= (x.mat().array() > 0.0).cast<double>();
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

struct MlpGradients {
  std::vector<double> params;
  Tensor input;
};

inline MlpGradients mlp_backward(const MlpParams& params, const MlpTape& tape,
                                 const Tensor& output_grad) {
  MlpGradients g;
  g.params.assign(params.size(), 0.0);
  Tensor og = output_grad;
  if (og.rank() == 1) og = Tensor({1, og.size()}, og.values());
  g.input = mlp_backward_into(params, tape, og, g.params);
  if (output_grad.rank() == 1) g.input = Tensor::vector(std::move(g.input.values()));
  return g;
}

inline MlpGradients mlp_backward(const MlpParams& params, const Tensor& input,
                                 const Tensor& output_grad) {
  MlpTape tape;
  Tensor batched = input.rank() == 1 ? Tensor({1, input.size()}, input.values()) : input;
  mlp_forward(params, batched, tape);
  if (output_grad.cols() != params.out_dim() || output_grad.rows() != batched.rows()) {
    throw ShapeError("mlp_backward: output_grad shape " + shape_string(output_grad.shape()) +
                     " does not match the network output");
  }
  return mlp_backward(params, tape, output_grad);
}

}  // namespace pilot
