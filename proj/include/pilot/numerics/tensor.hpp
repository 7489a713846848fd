#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pilot/error.hpp"

namespace pilot {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// Storage aligned to 64 bytes. Eigen picks scalar or packet code for the
// leading elements of a reduction from the buffer address, so unaligned heap
// storage makes results depend on where malloc placed it.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor of doubles. Rank 1 tensors are treated as a single
// row; rank 2 tensors as [batch, features].
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::span<const double> data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (element_count(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                       std::to_string(data_.size()) + " values");
    }
  }

  static Tensor vector(std::span<const double> values) { return Tensor({values.size()}, values); }

  static Tensor vector(std::initializer_list<double> values) {
    return vector(std::span<const double>(values.begin(), values.size()));
  }

  static Tensor matrix_from(std::size_t rows, std::size_t cols, std::span<const double> values) {
    return Tensor({rows, cols}, values);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : data_.size() / shape_.back();
  }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  AlignedVector& values() { return data_; }
  const AlignedVector& values() const { return data_; }
  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  MatrixMap mat() {
    return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }
  ConstMatrixMap mat() const {
    return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Tensor& other) const = default;

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  std::vector<std::size_t> shape_;
  AlignedVector data_;
};

// Column-wise concatenation of [B, a] and [B, b] (rank-1 inputs count as B = 1).
inline Tensor concat_cols(std::initializer_list<const Tensor*> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    if (rows == 0) rows = p->rows();
    if (p->rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(p->shape()));
    }
    cols += p->cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t c = 0;
    for (const Tensor* p : parts) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(c));
      c += src.size();
    }
  }
  return out;
}

// Columns [begin, begin + count) of a batched tensor.
inline Tensor slice_cols(const Tensor& t, std::size_t begin, std::size_t count) {
  if (begin + count > t.cols()) {
    throw ShapeError("slice_cols: range exceeds " + shape_string(t.shape()));
  }
  Tensor out = Tensor::matrix(t.rows(), count);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto src = t.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

inline Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor::matrix(0, 0);
  const std::size_t cols = rows.front().size();
  Tensor out = Tensor::matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ShapeError("stack_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
  }
  return out;
}

}  // namespace pilot
