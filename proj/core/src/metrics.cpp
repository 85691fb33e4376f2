#include "mgvsr/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "mgvsr/error.hpp"

namespace mgvsr {
namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct FrameLayout {
  std::size_t frames, channels, height, width;
};

FrameLayout layout_of(const Tensor<double>& a, const Tensor<double>& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.rank() < 3 || a.empty()) throw ShapeError(std::string(where) + ": expected ... x C x H x W frames");
  const std::size_t r = a.rank();
  FrameLayout l{1, a.dim(r - 3), a.dim(r - 2), a.dim(r - 1)};
  for (std::size_t i = 0; i + 3 < r; ++i) l.frames *= a.dim(i);
  return l;
}

// Planes seen by the metric for one frame, each height*width long.
std::vector<std::vector<double>> frame_planes(const Tensor<double>& t, const FrameLayout& l, std::size_t f,
                                              MetricChannels channels) {
  const std::size_t plane = l.height * l.width;
  const double* base = t.raw() + f * l.channels * plane;
  std::vector<std::vector<double>> out;
  if (channels == MetricChannels::rgb) {
    for (std::size_t c = 0; c < l.channels; ++c) out.emplace_back(base + c * plane, base + (c + 1) * plane);
    return out;
  }
  if (l.channels != 3) throw ShapeError("luma metrics need 3-channel frames");
  std::vector<double> y(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    y[i] = (16.0 + 65.481 * base[i] + 128.553 * base[plane + i] + 24.966 * base[2 * plane + i]) / 255.0;
  }
  out.push_back(std::move(y));
  return out;
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  const double centre = static_cast<double>(kWindow / 2);
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - centre;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-region Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& g) {
  const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * img[y * w + x + k];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w) {
  static const auto g = gaussian_taps();
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, g);
  const auto mu_b = filter_valid(b, h, w, g);
  const auto e_aa = filter_valid(aa, h, w, g);
  const auto e_bb = filter_valid(bb, h, w, g);
  const auto e_ab = filter_valid(ab, h, w, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

MetricChannels parse_metric_channels(const std::string& name) {
  if (name == "rgb") return MetricChannels::rgb;
  if (name == "luma" || name == "y") return MetricChannels::luma;
  throw InvalidArgument("unknown metric channels '" + name + "' (expected rgb or luma)");
}

double psnr(const Tensor<double>& a, const Tensor<double>& b, double max_val, MetricChannels channels) {
  if (!(max_val > 0.0)) throw InvalidArgument("psnr: max_val must be positive");
  const FrameLayout l = layout_of(a, b, "psnr");
  double total = 0.0;
  for (std::size_t f = 0; f < l.frames; ++f) {
    const auto pa = frame_planes(a, l, f, channels);
    const auto pb = frame_planes(b, l, f, channels);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < pa.size(); ++c)
      for (std::size_t i = 0; i < pa[c].size(); ++i) {
        const double d = pa[c][i] - pb[c][i];
        sq += d * d;
        ++count;
      }
    const double mse = sq / static_cast<double>(count);
    total += mse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, 10.0 * std::log10(max_val * max_val / mse));
  }
  return total / static_cast<double>(l.frames);
}

double ssim(const Tensor<double>& a, const Tensor<double>& b, MetricChannels channels) {
  const FrameLayout l = layout_of(a, b, "ssim");
  if (l.height < kWindow || l.width < kWindow) {
    throw ShapeError("ssim: frames of " + std::to_string(l.height) + "x" + std::to_string(l.width) +
                     " are smaller than the 11x11 window");
  }
  double total = 0.0;
  for (std::size_t f = 0; f < l.frames; ++f) {
    const auto pa = frame_planes(a, l, f, channels);
    const auto pb = frame_planes(b, l, f, channels);
    double frame_total = 0.0;
    for (std::size_t c = 0; c < pa.size(); ++c) frame_total += ssim_plane(pa[c], pb[c], l.height, l.width);
    total += frame_total / static_cast<double>(pa.size());
  }
  return total / static_cast<double>(l.frames);
}

MetricReport evaluate_metrics(const Tensor<double>& a, const Tensor<double>& b, MetricChannels channels) {
  const FrameLayout l = layout_of(a, b, "evaluate_metrics");
  return {psnr(a, b, 1.0, channels), ssim(a, b, channels), l.frames};
}

}  // namespace mgvsr
