#include <cmath>

#include "mgvsr/error.hpp"
#include "mgvsr/train.hpp"

namespace mgvsr {

template <typename T>
LossResult<T> loss_charbonnier(const Tensor<T>& pred, const Tensor<T>& target, double normalizer) {
  pred.require_same_shape(target, "loss_charbonnier");
  if (!(normalizer > 0.0)) throw InvalidArgument("loss_charbonnier: normalizer must be positive");
  LossResult<T> r{0.0, Tensor<T>(pred.shape())};
  const T* p = pred.raw();
  const T* q = target.raw();
  T* g = r.grad.raw();
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(q[i]);
    const double root = std::sqrt(d * d + kCharbonnierEpsSq);
    sum += root;
    g[i] = static_cast<T>(d / root / normalizer);
  }
  r.value = sum / normalizer;
  return r;
}

template <typename T>
LossResult<T> loss_charbonnier(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.empty()) throw ShapeError("loss_charbonnier: empty input");
  return loss_charbonnier(pred, target, static_cast<double>(pred.size()));
}

template LossResult<float> loss_charbonnier(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> loss_charbonnier(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> loss_charbonnier(const Tensor<float>&, const Tensor<float>&, double);
template LossResult<double> loss_charbonnier(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace mgvsr
