#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "mgvsr/schedule.hpp"
#include "mgvsr/tensor.hpp"

namespace mgvsr {

inline constexpr std::size_t kDegradeFactor = 4;

struct Velocity {
  int dy = 0;
  int dx = 0;
};

/// Synthetic HR clip and its 4x4 box-mean LR counterpart, both in [0, 1].
/// hr: frames x 3 x H x W, lr: frames x 3 x H/4 x W/4.
struct VideoClip {
  Tensor<double> hr;
  Tensor<double> lr;
  Velocity velocity;
  std::uint64_t seed = 0;

  std::size_t frames() const { return hr.dim(0); }
  std::size_t lr_height() const { return lr.dim(2); }
  std::size_t lr_width() const { return lr.dim(3); }
};

/// Periodic texture (8 random-orientation sinusoids plus band-limited noise)
/// translated by a constant per-clip velocity in {-2..2}^2 HR pixels per frame,
/// with wrap-around. Deterministic per seed.
VideoClip generate_clip(std::uint64_t seed, std::size_t frames, std::size_t height, std::size_t width);

/// Same texture but with a caller-chosen velocity.
VideoClip generate_clip(std::uint64_t seed, std::size_t frames, std::size_t height, std::size_t width,
                        Velocity velocity);

/// factor x factor block mean over the last two dimensions (row-major summation).
Tensor<double> box_downsample(const Tensor<double>& hr, std::size_t factor = kDegradeFactor);

/// Frame order after flipping and appending: [0..L-1, L-1..0].
std::vector<std::size_t> flip_concat_indices(std::size_t length);

template <typename Frame>
std::vector<Frame> flip_concat(const std::vector<Frame>& frames) {
  std::vector<Frame> out(frames);
  out.insert(out.end(), frames.rbegin(), frames.rend());
  return out;
}

/// Frame indices of a clip extended by repeated flip-concat until it holds at
/// least `required` frames.
std::vector<std::size_t> extended_frame_order(std::size_t clip_frames, std::size_t required);

/// One sample's window. LR origin/size in LR pixels; the HR window is the same
/// box scaled by 4. Frames are taken from extended_frame_order(clip, t0 + count).
struct CropSpec {
  std::size_t clip = 0;
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t t0 = 0;
  std::size_t frames = 0;
};

template <typename T>
struct Minibatch {
  Tensor<T> lr;  // T x N x 3 x h x w
  Tensor<T> hr;  // T x N x 3 x 4h x 4w
  std::vector<CropSpec> crops;
};

using SamplerRng = std::mt19937_64;

/// Draws clip, segment and aligned crop for each sample of the shape.
std::vector<CropSpec> draw_crops(std::span<const VideoClip> clips, const MinibatchShape& shape, SamplerRng& rng);

/// Cuts the windows described by `crops` out of the clips.
template <typename T>
Minibatch<T> extract_minibatch(std::span<const VideoClip> clips, std::span<const CropSpec> crops);

/// draw_crops followed by extract_minibatch.
template <typename T>
Minibatch<T> sample_minibatch(std::span<const VideoClip> clips, const MinibatchShape& shape, SamplerRng& rng);

/// Train and validation pools drawn from disjoint seed ranges:
/// train = [seed, seed + train_count), validation = the next val_count seeds.
struct DataConfig {
  std::size_t train_clips = 0;
  std::size_t val_clips = 0;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t seed = 0;
};

struct ClipPool {
  std::vector<VideoClip> train;
  std::vector<VideoClip> validation;
};

ClipPool make_clip_pool(const DataConfig& cfg);

/// Binary PPM (P6) of one 3 x H x W frame, values clamped to [0, 1].
void write_ppm(const std::filesystem::path& path, const Tensor<double>& frame);

/// Writes hr_XXX.ppm / lr_XXX.ppm per frame plus hr.bin / lr.bin raw tensors.
void export_clip(const std::filesystem::path& dir, const VideoClip& clip);

}  // namespace mgvsr
