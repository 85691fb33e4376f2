#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "mgvsr/tensor.hpp"

namespace mgvsr::test_support {

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Largest absolute difference divided by the largest magnitude of the reference.
inline double relative_error(const Tensor<double>& got, const Tensor<double>& want) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff = std::max(diff, std::abs(got.raw()[i] - want.raw()[i]));
    scale = std::max(scale, std::abs(want.raw()[i]));
  }
  return diff / std::max(scale, 1e-12);
}

// Central differences of the scalar f with respect to every entry of x.
inline Tensor<double> numeric_gradient(const std::function<double()>& f, Tensor<double>& x, double step = 1e-5) {
  Tensor<double> g = Tensor<double>::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double& v = x.raw()[i];
    const double saved = v;
    v = saved + step;
    const double plus = f();
    v = saved - step;
    const double minus = f();
    v = saved;
    g.raw()[i] = (plus - minus) / (2.0 * step);
  }
  return g;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.raw()[i] * b.raw()[i];
  return s;
}

}  // namespace mgvsr::test_support
