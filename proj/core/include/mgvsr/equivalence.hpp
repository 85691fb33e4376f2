#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mgvsr/data.hpp"
#include "mgvsr/model.hpp"
#include "mgvsr/train.hpp"

namespace mgvsr {

/// m small minibatches of n samples each and their union as one large batch.
/// Gradients are of the mean loss over the respective batch, at flat weights.
struct EquivalenceProblem {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> weights;
  std::function<std::vector<double>(const std::vector<double>& w, std::size_t batch)> small_batch_grad;
  std::function<std::vector<double>(const std::vector<double>& w)> large_batch_grad;
};

struct DriftPoint {
  double eta = 0.0;
  double gap = 0.0;  // || w_{t+m} - w'_{t+1} ||
};

struct EquivalenceReport {
  std::size_t m = 0;
  std::size_t n = 0;
  double eta = 0.0;
  double frozen_gap = 0.0;           // || dw - dw' ||
  double frozen_relative_gap = 0.0;  // frozen_gap / || dw ||
  std::vector<DriftPoint> drift;
  double drift_order = 0.0;  // least-squares slope of log gap vs log eta

  static constexpr double kFrozenTolerance = 1e-10;
  static constexpr double kOrderLow = 1.7;
  static constexpr double kOrderHigh = 2.3;

  bool frozen_ok() const { return frozen_relative_gap < kFrozenTolerance; }
  bool drift_ok() const { return drift.size() >= 2 && drift_order >= kOrderLow && drift_order <= kOrderHigh; }
};

/// Compares m plain-SGD updates whose gradients are all frozen at w_t (rate eta,
/// 1/n normalisation) with one update on the union batch at rate m * eta
/// (1/(mn) normalisation). Fills m, n, eta and the frozen gaps.
EquivalenceReport equivalence_frozen(const EquivalenceProblem& problem, double eta, OptimKind kind = OptimKind::sgd);

/// For each eta runs m true sequential SGD steps and one scaled large step from
/// the same weights, records the gap and fits its order in eta.
EquivalenceReport equivalence_drift(const EquivalenceProblem& problem, const std::vector<double>& etas,
                                    OptimKind kind = OptimKind::sgd);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Joins minibatches along the sample axis.
template <typename T>
Minibatch<T> concat_minibatches(const std::vector<Minibatch<T>>& parts);

/// Problem over the recurrent model in double precision.
EquivalenceProblem make_model_problem(const TinyRvsrParams<double>& params, std::vector<Minibatch<double>> batches);

}  // namespace mgvsr
