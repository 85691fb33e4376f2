#pragma once

#include <cstddef>
#include <string>

#include "mgvsr/tensor.hpp"

namespace mgvsr {

/// Which planes the metrics see: all RGB channels (averaged) or BT.601 luma.
enum class MetricChannels { rgb, luma };

MetricChannels parse_metric_channels(const std::string& name);

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::size_t frame_count = 0;
};

/// PSNR reported for a frame with zero error.
inline constexpr double kPsnrCapDb = 99.0;

// Inputs are frame stacks: the trailing three dimensions are C x H x W and all
// leading dimensions enumerate frames (so both F x C x H x W and clips work).

/// 10 log10(max^2 / MSE) per frame, then averaged over frames.
double psnr(const Tensor<double>& a, const Tensor<double>& b, double max_val = 1.0,
            MetricChannels channels = MetricChannels::rgb);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), valid region only,
/// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 1; channel mean, then frame mean.
double ssim(const Tensor<double>& a, const Tensor<double>& b, MetricChannels channels = MetricChannels::rgb);

MetricReport evaluate_metrics(const Tensor<double>& a, const Tensor<double>& b,
                              MetricChannels channels = MetricChannels::rgb);

}  // namespace mgvsr
