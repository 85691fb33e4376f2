#include "mgvsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "mgvsr/error.hpp"
#include "mgvsr/tensor_io.hpp"

namespace mgvsr {
namespace {

constexpr std::size_t kChannels = 3;
constexpr int kSinusoids = 8;
constexpr int kNoiseModes = 24;
constexpr double kNoiseAmplitude = 0.12;

struct Wave {
  double fy, fx;  // integer cycles per period so the texture tiles
  double phase;
  double amp[kChannels];
};

Wave random_wave(SamplerRng& rng, double radius_lo, double radius_hi, double amplitude) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> radius(radius_lo, radius_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = angle(rng);
  const double r = radius(rng);
  Wave w{};
  w.fy = std::round(r * std::sin(theta));
  w.fx = std::round(r * std::cos(theta));
  if (w.fy == 0.0 && w.fx == 0.0) w.fx = 1.0;
  w.phase = 2.0 * std::numbers::pi * unit(rng);
  // Correlated colour: shared base amplitude with per-channel variation.
  const double base = amplitude * (0.5 + 0.5 * unit(rng));
  for (double& a : w.amp) a = base * (0.6 + 0.4 * unit(rng));
  return w;
}

Tensor<double> periodic_texture(SamplerRng& rng, std::size_t height, std::size_t width) {
  const double extent = static_cast<double>(std::min(height, width));
  std::vector<Wave> waves;
  for (int k = 0; k < kSinusoids; ++k) waves.push_back(random_wave(rng, 1.0, extent / 12.0, 1.0));
  for (int k = 0; k < kNoiseModes; ++k) {
    waves.push_back(random_wave(rng, extent / 12.0, extent / 5.0, kNoiseAmplitude));
  }
  double norm[kChannels] = {0.0, 0.0, 0.0};
  for (const Wave& w : waves)
    for (std::size_t c = 0; c < kChannels; ++c) norm[c] += w.amp[c];

  Tensor<double> tex({kChannels, height, width});
  const double two_pi = 2.0 * std::numbers::pi;
  for (const Wave& w : waves) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double arg = two_pi * (w.fy * static_cast<double>(y) / static_cast<double>(height) +
                                     w.fx * static_cast<double>(x) / static_cast<double>(width)) + w.phase;
        const double s = std::sin(arg);
        for (std::size_t c = 0; c < kChannels; ++c) tex[(c * height + y) * width + x] += w.amp[c] * s;
      }
    }
  }
  // Sum of |amplitudes| bounds the sum, so values land in [0.1, 0.9].
  for (std::size_t c = 0; c < kChannels; ++c)
    for (std::size_t i = 0; i < height * width; ++i) {
      double& v = tex[c * height * width + i];
      v = 0.5 + 0.4 * v / norm[c];
    }
  return tex;
}

std::size_t wrap(long long v, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((v % m) + m) % m);
}

}  // namespace

VideoClip generate_clip(std::uint64_t seed, std::size_t frames, std::size_t height, std::size_t width) {
  SamplerRng rng(seed);
  std::uniform_int_distribution<int> vel(-2, 2);
  const Velocity v{vel(rng), vel(rng)};
  return generate_clip(seed, frames, height, width, v);
}

VideoClip generate_clip(std::uint64_t seed, std::size_t frames, std::size_t height, std::size_t width,
                        Velocity velocity) {
  if (frames == 0) throw InvalidArgument("generate_clip: need at least one frame");
  if (height == 0 || width == 0 || height % kDegradeFactor != 0 || width % kDegradeFactor != 0) {
    throw InvalidArgument("generate_clip: HR size " + std::to_string(height) + "x" + std::to_string(width) +
                          " must be positive and divisible by 4");
  }
  // Skip the two velocity draws so the texture only depends on the seed.
  SamplerRng rng(seed);
  rng.discard(2);
  const Tensor<double> tex = periodic_texture(rng, height, width);

  VideoClip clip;
  clip.seed = seed;
  clip.velocity = velocity;
  clip.hr = Tensor<double>({frames, kChannels, height, width});
  for (std::size_t t = 0; t < frames; ++t) {
    const long long oy = static_cast<long long>(t) * velocity.dy;
    const long long ox = static_cast<long long>(t) * velocity.dx;
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = wrap(static_cast<long long>(y) - oy, height);
        for (std::size_t x = 0; x < width; ++x) {
          const std::size_t sx = wrap(static_cast<long long>(x) - ox, width);
          clip.hr[((t * kChannels + c) * height + y) * width + x] = tex[(c * height + sy) * width + sx];
        }
      }
  }
  clip.lr = box_downsample(clip.hr);
  return clip;
}

Tensor<double> box_downsample(const Tensor<double>& hr, std::size_t factor) {
  if (hr.rank() < 2 || factor == 0) throw ShapeError("box_downsample: need rank >= 2 and positive factor");
  const std::size_t h = hr.dim(hr.rank() - 2), w = hr.dim(hr.rank() - 1);
  if (h % factor != 0 || w % factor != 0) {
    throw ShapeError("box_downsample: " + shape_str(hr.shape()) + " not divisible by " + std::to_string(factor));
  }
  Shape out_shape = hr.shape();
  out_shape[out_shape.size() - 2] = h / factor;
  out_shape[out_shape.size() - 1] = w / factor;
  Tensor<double> lr(out_shape);
  const std::size_t planes = hr.size() / (h * w);
  const std::size_t oh = h / factor, ow = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = hr.raw() + p * h * w;
    double* dst = lr.raw() + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (std::size_t i = 0; i < factor; ++i)
          for (std::size_t j = 0; j < factor; ++j) sum += src[(y * factor + i) * w + x * factor + j];
        dst[y * ow + x] = sum * inv;
      }
  }
  return lr;
}

std::vector<std::size_t> flip_concat_indices(std::size_t length) {
  std::vector<std::size_t> order(length);
  for (std::size_t i = 0; i < length; ++i) order[i] = i;
  return flip_concat(order);
}

std::vector<std::size_t> extended_frame_order(std::size_t clip_frames, std::size_t required) {
  if (clip_frames == 0) throw InvalidArgument("clip has no frames");
  std::vector<std::size_t> order(clip_frames);
  for (std::size_t i = 0; i < clip_frames; ++i) order[i] = i;
  while (order.size() < required) order = flip_concat(order);
  return order;
}

std::vector<CropSpec> draw_crops(std::span<const VideoClip> clips, const MinibatchShape& shape, SamplerRng& rng) {
  if (clips.empty()) throw InvalidArgument("sample_minibatch: clip pool is empty");
  if (shape.batch == 0 || shape.temporal == 0) throw InvalidArgument("sample_minibatch: batch and temporal must be positive");
  const std::size_t lh = clips.front().lr_height(), lw = clips.front().lr_width();
  for (const auto& c : clips) {
    if (c.lr_height() != lh || c.lr_width() != lw) throw ShapeError("sample_minibatch: clips differ in size");
  }
  if (shape.spatial.height == 0 || shape.spatial.width == 0 || shape.spatial.height > lh || shape.spatial.width > lw) {
    throw InvalidArgument("sample_minibatch: crop " + std::to_string(shape.spatial.height) + "x" +
                          std::to_string(shape.spatial.width) + " does not fit LR frame " + std::to_string(lh) + "x" +
                          std::to_string(lw));
  }
  std::vector<CropSpec> crops;
  crops.reserve(shape.batch);
  for (std::size_t i = 0; i < shape.batch; ++i) {
    CropSpec c;
    c.clip = std::uniform_int_distribution<std::size_t>(0, clips.size() - 1)(rng);
    const std::size_t available = extended_frame_order(clips[c.clip].frames(), shape.temporal).size();
    c.t0 = std::uniform_int_distribution<std::size_t>(0, available - shape.temporal)(rng);
    c.frames = shape.temporal;
    c.y = std::uniform_int_distribution<std::size_t>(0, lh - shape.spatial.height)(rng);
    c.x = std::uniform_int_distribution<std::size_t>(0, lw - shape.spatial.width)(rng);
    c.height = shape.spatial.height;
    c.width = shape.spatial.width;
    crops.push_back(c);
  }
  return crops;
}

template <typename T>
Minibatch<T> extract_minibatch(std::span<const VideoClip> clips, std::span<const CropSpec> crops) {
  if (crops.empty()) throw InvalidArgument("extract_minibatch: no crops");
  const CropSpec& first = crops.front();
  const std::size_t n = crops.size(), frames = first.frames, h = first.height, w = first.width;
  const std::size_t s = kDegradeFactor;
  Minibatch<T> mb;
  mb.lr = Tensor<T>({frames, n, kChannels, h, w});
  mb.hr = Tensor<T>({frames, n, kChannels, h * s, w * s});
  for (std::size_t b = 0; b < n; ++b) {
    const CropSpec& c = crops[b];
    if (c.frames != frames || c.height != h || c.width != w) throw ShapeError("extract_minibatch: crops differ in shape");
    if (c.clip >= clips.size()) throw OutOfRange("extract_minibatch: crop refers to missing clip");
    const VideoClip& clip = clips[c.clip];
    if (c.y + h > clip.lr_height() || c.x + w > clip.lr_width()) throw OutOfRange("extract_minibatch: crop outside frame");
    const auto order = extended_frame_order(clip.frames(), c.t0 + frames);
    const std::size_t lh = clip.lr_height(), lw = clip.lr_width(), hh = lh * s, hw = lw * s;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t src_t = order[c.t0 + t];
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const double* lr_plane = clip.lr.raw() + (src_t * kChannels + ch) * lh * lw;
        T* lr_dst = mb.lr.raw() + ((t * n + b) * kChannels + ch) * h * w;
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) lr_dst[y * w + x] = static_cast<T>(lr_plane[(c.y + y) * lw + c.x + x]);
        const double* hr_plane = clip.hr.raw() + (src_t * kChannels + ch) * hh * hw;
        T* hr_dst = mb.hr.raw() + ((t * n + b) * kChannels + ch) * h * s * w * s;
        for (std::size_t y = 0; y < h * s; ++y)
          for (std::size_t x = 0; x < w * s; ++x) {
            hr_dst[y * w * s + x] = static_cast<T>(hr_plane[(c.y * s + y) * hw + c.x * s + x]);
          }
      }
    }
  }
  mb.crops.assign(crops.begin(), crops.end());
  return mb;
}

template <typename T>
Minibatch<T> sample_minibatch(std::span<const VideoClip> clips, const MinibatchShape& shape, SamplerRng& rng) {
  const auto crops = draw_crops(clips, shape, rng);
  return extract_minibatch<T>(clips, crops);
}

ClipPool make_clip_pool(const DataConfig& cfg) {
  if (cfg.train_clips == 0) throw InvalidArgument("data: need at least one training clip");
  ClipPool pool;
  for (std::size_t i = 0; i < cfg.train_clips; ++i) {
    pool.train.push_back(generate_clip(cfg.seed + i, cfg.frames, cfg.height, cfg.width));
  }
  for (std::size_t i = 0; i < cfg.val_clips; ++i) {
    pool.validation.push_back(generate_clip(cfg.seed + cfg.train_clips + i, cfg.frames, cfg.height, cfg.width));
  }
  return pool;
}

void write_ppm(const std::filesystem::path& path, const Tensor<double>& frame) {
  if (frame.rank() != 3 || frame.dim(0) != kChannels) throw ShapeError("write_ppm: expected 3 x H x W frame");
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os << "P6\n" << w << ' ' << h << "\n255\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double v = std::clamp(frame[(c * h + y) * w + x], 0.0, 1.0);
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
}

void export_clip(const std::filesystem::path& dir, const VideoClip& clip) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    std::snprintf(name, sizeof name, "hr_%03zu.ppm", t);
    write_ppm(dir / name, clip.hr.slice0(t));
    std::snprintf(name, sizeof name, "lr_%03zu.ppm", t);
    write_ppm(dir / name, clip.lr.slice0(t));
  }
  save_tensor(dir / "hr.bin", clip.hr);
  save_tensor(dir / "lr.bin", clip.lr);
}

template Minibatch<float> extract_minibatch<float>(std::span<const VideoClip>, std::span<const CropSpec>);
template Minibatch<double> extract_minibatch<double>(std::span<const VideoClip>, std::span<const CropSpec>);
template Minibatch<float> sample_minibatch<float>(std::span<const VideoClip>, const MinibatchShape&, SamplerRng&);
template Minibatch<double> sample_minibatch<double>(std::span<const VideoClip>, const MinibatchShape&, SamplerRng&);

}  // namespace mgvsr
