#include <cmath>

#include "mgvsr/error.hpp"
#include "mgvsr/train.hpp"

namespace mgvsr {

OptimKind parse_optim_kind(const std::string& name) {
  if (name == "sgd") return OptimKind::sgd;
  if (name == "sgd-momentum") return OptimKind::sgd_momentum;
  if (name == "adam") return OptimKind::adam;
  throw InvalidArgument("unknown optimizer '" + name + "' (expected sgd, sgd-momentum or adam)");
}

std::string to_string(OptimKind kind) {
  switch (kind) {
    case OptimKind::sgd: return "sgd";
    case OptimKind::sgd_momentum: return "sgd-momentum";
    case OptimKind::adam: return "adam";
  }
  return "unknown";
}

template <typename T>
Optimizer<T>::Optimizer(OptimKind kind, const TinyRvsrParams<T>& like, OptimHyper hyper)
    : kind_(kind), hyper_(hyper) {
  if (kind_ != OptimKind::sgd) first_ = like.zeros_like();
  if (kind_ == OptimKind::adam) second_ = like.zeros_like();
}

template <typename T>
void Optimizer<T>::step(TinyRvsrParams<T>& params, const TinyRvsrParams<T>& grads, double lr) {
  auto w = params.named_tensors();
  const auto g = grads.named_tensors();
  if (w.size() != g.size()) throw ShapeError("optimizer: gradient does not match parameters");
  ++steps_;
  const T rate = static_cast<T>(lr);
  if (kind_ == OptimKind::sgd) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i].second->require_same_shape(*g[i].second, "optimizer");
      T* wp = w[i].second->raw();
      const T* gp = g[i].second->raw();
      for (std::size_t k = 0; k < w[i].second->size(); ++k) wp[k] -= rate * gp[k];
    }
    return;
  }
  auto m = first_.named_tensors();
  if (kind_ == OptimKind::sgd_momentum) {
    const T mu = static_cast<T>(hyper_.momentum);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i].second->require_same_shape(*g[i].second, "optimizer");
      T* wp = w[i].second->raw();
      T* vp = m[i].second->raw();
      const T* gp = g[i].second->raw();
      for (std::size_t k = 0; k < w[i].second->size(); ++k) {
        vp[k] = mu * vp[k] + gp[k];
        wp[k] -= rate * vp[k];
      }
    }
    return;
  }
  auto v = second_.named_tensors();
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(hyper_.beta1), b2 = static_cast<T>(hyper_.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(hyper_.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(hyper_.beta2, t)));
  const T eps = static_cast<T>(hyper_.eps);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i].second->require_same_shape(*g[i].second, "optimizer");
    T* wp = w[i].second->raw();
    T* mp = m[i].second->raw();
    T* sp = v[i].second->raw();
    const T* gp = g[i].second->raw();
    for (std::size_t k = 0; k < w[i].second->size(); ++k) {
      mp[k] = b1 * mp[k] + (T{1} - b1) * gp[k];
      sp[k] = b2 * sp[k] + (T{1} - b2) * gp[k] * gp[k];
      wp[k] -= rate * (mp[k] * c1) / (std::sqrt(sp[k] * c2) + eps);
    }
  }
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr, double momentum,
              std::vector<double>& velocity) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: gradient length does not match parameters");
  if (velocity.empty()) velocity.assign(params.size(), 0.0);
  if (velocity.size() != params.size()) throw ShapeError("sgd_step: velocity length does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace mgvsr
