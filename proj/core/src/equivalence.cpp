#include "mgvsr/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mgvsr/error.hpp"

namespace mgvsr {
namespace {

void require_sgd(OptimKind kind) {
  if (kind != OptimKind::sgd) {
    throw InvalidArgument("equivalence harness applies to plain SGD only, got " + to_string(kind));
  }
}

void require_problem(const EquivalenceProblem& p) {
  if (p.m == 0 || p.n == 0) throw InvalidArgument("equivalence: m and n must be positive");
  if (!p.small_batch_grad || !p.large_batch_grad) throw InvalidArgument("equivalence: gradient callbacks missing");
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  if (x.size() != y.size()) throw ShapeError("equivalence: gradient length does not match weights");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

std::vector<double> large_step(const EquivalenceProblem& p, double eta) {
  std::vector<double> w = p.weights;
  axpy(w, -static_cast<double>(p.m) * eta, p.large_batch_grad(p.weights));
  return w;
}

}  // namespace

EquivalenceReport equivalence_frozen(const EquivalenceProblem& p, double eta, OptimKind kind) {
  require_sgd(kind);
  require_problem(p);
  if (!(eta > 0.0)) throw InvalidArgument("equivalence: eta must be positive");
  std::vector<double> small(p.weights.size(), 0.0);
  for (std::size_t i = 0; i < p.m; ++i) axpy(small, -eta, p.small_batch_grad(p.weights, i));
  std::vector<double> large(p.weights.size(), 0.0);
  axpy(large, -static_cast<double>(p.m) * eta, p.large_batch_grad(p.weights));

  EquivalenceReport r;
  r.m = p.m;
  r.n = p.n;
  r.eta = eta;
  r.frozen_gap = distance(small, large);
  const double scale = norm(small);
  r.frozen_relative_gap = scale > 0.0 ? r.frozen_gap / scale : r.frozen_gap;
  return r;
}

EquivalenceReport equivalence_drift(const EquivalenceProblem& p, const std::vector<double>& etas, OptimKind kind) {
  require_sgd(kind);
  require_problem(p);
  if (etas.empty()) throw InvalidArgument("equivalence: need at least one learning rate");
  EquivalenceReport r = equivalence_frozen(p, etas.front(), kind);
  std::vector<double> xs, ys;
  for (double eta : etas) {
    if (!(eta > 0.0)) throw InvalidArgument("equivalence: learning rates must be positive");
    std::vector<double> w = p.weights;
    for (std::size_t i = 0; i < p.m; ++i) axpy(w, -eta, p.small_batch_grad(w, i));
    const double gap = distance(w, large_step(p, eta));
    r.drift.push_back({eta, gap});
    xs.push_back(eta);
    ys.push_back(gap);
  }
  const bool fit = xs.size() >= 2 && std::all_of(ys.begin(), ys.end(), [](double g) { return g > 0.0; });
  r.drift_order = fit ? log_log_slope(xs, ys) : 0.0;
  return r;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("log_log_slope: need matching series of length >= 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidArgument("log_log_slope: x values must differ");
  return sxy / sxx;
}

template <typename T>
Minibatch<T> concat_minibatches(const std::vector<Minibatch<T>>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_minibatches: nothing to join");
  const Shape lr0 = parts.front().lr.shape(), hr0 = parts.front().hr.shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.lr.rank() != 5 || p.lr.dim(0) != lr0[0] || p.lr.dim(3) != lr0[3] || p.lr.dim(4) != lr0[4] ||
        p.hr.dim(3) != hr0[3]) {
      throw ShapeError("concat_minibatches: batches differ in shape");
    }
    total += p.lr.dim(1);
  }
  auto join = [&](auto member, Shape shape) {
    const std::size_t frames = shape[0];
    const std::size_t inner = shape_numel(shape) / (shape[0] * shape[1]);
    shape[1] = total;
    Tensor<T> out(shape);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const Tensor<T>& src = p.*member;
      const std::size_t count = src.dim(1);
      for (std::size_t t = 0; t < frames; ++t) {
        std::copy(src.raw() + t * count * inner, src.raw() + (t + 1) * count * inner,
                  out.raw() + (t * total + offset) * inner);
      }
      offset += count;
    }
    return out;
  };
  Minibatch<T> mb;
  mb.lr = join(&Minibatch<T>::lr, lr0);
  mb.hr = join(&Minibatch<T>::hr, hr0);
  for (const auto& p : parts) mb.crops.insert(mb.crops.end(), p.crops.begin(), p.crops.end());
  return mb;
}

EquivalenceProblem make_model_problem(const TinyRvsrParams<double>& params, std::vector<Minibatch<double>> batches) {
  if (batches.empty()) throw InvalidArgument("equivalence: need at least one minibatch");
  const std::size_t n = batches.front().lr.dim(1);
  for (const auto& b : batches) {
    if (b.lr.dim(1) != n) throw InvalidArgument("equivalence: all small minibatches must hold n samples");
  }
  auto shared = std::make_shared<const std::vector<Minibatch<double>>>(std::move(batches));
  auto large = std::make_shared<const Minibatch<double>>(concat_minibatches(*shared));
  auto model = std::make_shared<const TinyRvsrParams<double>>(params);

  EquivalenceProblem p;
  p.m = shared->size();
  p.n = n;
  p.weights = flatten(params);
  p.small_batch_grad = [shared, model](const std::vector<double>& w, std::size_t i) {
    TinyRvsrParams<double> at = *model;
    unflatten(w, at);
    return flatten(minibatch_gradient(at, shared->at(i)).grads);
  };
  p.large_batch_grad = [large, model](const std::vector<double>& w) {
    TinyRvsrParams<double> at = *model;
    unflatten(w, at);
    return flatten(minibatch_gradient(at, *large).grads);
  };
  return p;
}

template Minibatch<float> concat_minibatches(const std::vector<Minibatch<float>>&);
template Minibatch<double> concat_minibatches(const std::vector<Minibatch<double>>&);

}  // namespace mgvsr
