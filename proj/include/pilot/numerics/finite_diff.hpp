#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "pilot/error.hpp"

namespace pilot {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
inline std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> params,
                                            double step) {
  if (!(step > 0.0)) throw InputError("finite_diff_grad: step must be positive");
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double plus = f(x);
    x[i] = orig - step;
    const double minus = f(x);
    x[i] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericalError("finite_diff_grad: non-finite evaluation at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
// whose true gradient is ~0 from dominating on round-off alone.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace pilot
