#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mgvsr/tensor.hpp"

namespace mgvsr {

template <typename T>
struct ConvParam {
  Tensor<T> weight;  // K x C x 3 x 3
  Tensor<T> bias;    // K

  bool operator==(const ConvParam&) const = default;
};

/// Parameters of the tiny unidirectional recurrent x4 super-resolution net.
///
/// Per frame: features = lrelu(feat(LR_t)); fused = lrelu(fuse([features, hidden]));
/// B residual blocks; hidden = result; two (conv C->4C, pixel_shuffle 2, lrelu)
/// upsampling steps; SR_t = out(upsampled) + nearest_upsample(LR_t, 4).
///
/// The same struct doubles as the gradient container.
template <typename T>
struct TinyRvsrParams {
  std::size_t channels = 0;
  std::size_t blocks = 0;
  ConvParam<T> feat;
  ConvParam<T> fuse;
  std::vector<ConvParam<T>> residual;  // 2 * blocks convs, block-major
  ConvParam<T> up1;
  ConvParam<T> up2;
  ConvParam<T> out;

  /// Fixed parameter order: feat, fuse, residual..., up1, up2, out; weight then bias.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const;

  /// All-zero parameters with the same shapes.
  TinyRvsrParams zeros_like() const;

  std::size_t parameter_count() const;

  template <typename U>
  TinyRvsrParams<U> cast() const;

  bool operator==(const TinyRvsrParams&) const = default;
};

inline constexpr std::size_t kUpscale = 4;
inline constexpr double kLeakySlope = 0.1;

/// Closed form: (90 + 18B) C^2 + (64 + 2B) C + 3.
std::size_t tiny_rvsr_parameter_count(std::size_t channels, std::size_t blocks);

/// Kaiming-uniform (fan-in, leaky-relu gain) weights, zero biases.
template <typename T>
TinyRvsrParams<T> init_params(std::uint64_t seed, std::size_t channels, std::size_t blocks);

/// Every weight and bias zero; the network then reduces to the nearest-upsample path.
template <typename T>
TinyRvsrParams<T> zero_params(std::size_t channels, std::size_t blocks);

template <typename T>
struct BlockCache {
  Tensor<T> input;
  Tensor<T> inner_pre;
  Tensor<T> inner_act;
};

template <typename T>
struct FrameCache {
  Tensor<T> lr;
  Tensor<T> feat_pre;
  Tensor<T> fused_input;  // concat(features, previous hidden)
  Tensor<T> fuse_pre;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> hidden;
  Tensor<T> up1_pre;  // after pixel_shuffle, before activation
  Tensor<T> up1_act;
  Tensor<T> up2_pre;
  Tensor<T> up2_act;
};

/// Activations retained by forward_sequence, one entry per frame.
template <typename T>
struct ForwardCache {
  Shape input_shape;
  std::vector<FrameCache<T>> frames;
};

template <typename T>
struct SequenceOutput {
  Tensor<T> sr;  // T x N x 3 x 4h x 4w
  ForwardCache<T> cache;
};

/// lr_clip is T x N x 3 x h x w; the hidden state starts at zero.
template <typename T>
SequenceOutput<T> forward_sequence(const TinyRvsrParams<T>& params, const Tensor<T>& lr_clip);

/// Inference-only forward that keeps no activations.
template <typename T>
Tensor<T> predict_sequence(const TinyRvsrParams<T>& params, const Tensor<T>& lr_clip);

/// Full BPTT of sum(grad_sr * sr) w.r.t. every parameter.
template <typename T>
TinyRvsrParams<T> backward_sequence(const TinyRvsrParams<T>& params, const ForwardCache<T>& cache,
                                    const Tensor<T>& grad_sr);

/// Checkpoint directory: one raw tensor file per parameter plus manifest.json
/// (names, shapes, channels, blocks, seed).
struct Checkpoint {
  TinyRvsrParams<double> params;
  std::uint64_t seed = 0;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const TinyRvsrParams<T>& params, std::uint64_t seed);

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mgvsr
