#include "mgvsr/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "mgvsr/error.hpp"
#include "mgvsr/layers.hpp"
#include "mgvsr/tensor_io.hpp"

namespace mgvsr {
namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kRgb = 3;

template <typename T>
ConvParam<T> zero_conv(std::size_t out_c, std::size_t in_c) {
  return {Tensor<T>({out_c, in_c, kKernel, kKernel}), Tensor<T>({out_c})};
}

template <typename T, typename U>
ConvParam<U> cast_conv(const ConvParam<T>& p) {
  return {p.weight.template cast<U>(), p.bias.template cast<U>()};
}

template <typename T>
T slope() {
  return static_cast<T>(kLeakySlope);
}

template <typename T>
void accumulate(ConvParam<T>& into, const ops::ConvGrads<T>& g) {
  into.weight += g.weight;
  into.bias += g.bias;
}

template <typename T>
Tensor<T> conv(const ConvParam<T>& p, const Tensor<T>& x) {
  return ops::conv2d_forward(x, p.weight, p.bias);
}

// Runs one frame. When `cache` is non-null it receives every activation the
// backward pass needs.
template <typename T>
Tensor<T> frame_forward(const TinyRvsrParams<T>& p, const Tensor<T>& lr, Tensor<T>& hidden, FrameCache<T>* cache) {
  Tensor<T> feat_pre = conv(p.feat, lr);
  Tensor<T> fused_input = ops::concat_channels(ops::leaky_relu(feat_pre, slope<T>()), hidden);
  Tensor<T> fuse_pre = conv(p.fuse, fused_input);
  Tensor<T> f = ops::leaky_relu(fuse_pre, slope<T>());
  std::vector<BlockCache<T>> blocks;
  for (std::size_t b = 0; b < p.blocks; ++b) {
    Tensor<T> inner_pre = conv(p.residual[2 * b], f);
    Tensor<T> inner_act = ops::leaky_relu(inner_pre, slope<T>());
    Tensor<T> next = ops::add(f, conv(p.residual[2 * b + 1], inner_act));
    if (cache) blocks.push_back({std::move(f), std::move(inner_pre), std::move(inner_act)});
    f = std::move(next);
  }
  hidden = f;
  Tensor<T> up1_pre = ops::pixel_shuffle(conv(p.up1, f), 2);
  Tensor<T> up1_act = ops::leaky_relu(up1_pre, slope<T>());
  Tensor<T> up2_pre = ops::pixel_shuffle(conv(p.up2, up1_act), 2);
  Tensor<T> up2_act = ops::leaky_relu(up2_pre, slope<T>());
  Tensor<T> sr = ops::add(conv(p.out, up2_act), ops::nearest_upsample(lr, kUpscale));
  if (cache) {
    *cache = FrameCache<T>{lr,
                           std::move(feat_pre),
                           std::move(fused_input),
                           std::move(fuse_pre),
                           std::move(blocks),
                           std::move(f),
                           std::move(up1_pre),
                           std::move(up1_act),
                           std::move(up2_pre),
                           std::move(up2_act)};
  }
  return sr;
}

template <typename T>
void check_params(const TinyRvsrParams<T>& p) {
  if (p.residual.size() != 2 * p.blocks) throw ShapeError("model has inconsistent residual block count");
  if (p.channels == 0) throw ShapeError("model has zero channels");
}

template <typename T>
void check_clip(const Tensor<T>& clip) {
  if (clip.rank() != 5) throw ShapeError("expected T x N x 3 x h x w clip, got " + shape_str(clip.shape()));
  for (std::size_t d : clip.shape())
    if (d == 0) throw ShapeError("clip dimensions must be positive, got " + shape_str(clip.shape()));
  if (clip.dim(2) != kRgb) throw ShapeError("clip must have 3 colour channels, got " + shape_str(clip.shape()));
}

template <typename T>
Tensor<T> run_sequence(const TinyRvsrParams<T>& params, const Tensor<T>& lr_clip, ForwardCache<T>* cache) {
  check_params(params);
  check_clip(lr_clip);
  const std::size_t frames = lr_clip.dim(0), n = lr_clip.dim(1), h = lr_clip.dim(3), w = lr_clip.dim(4);
  Tensor<T> hidden({n, params.channels, h, w});
  std::vector<Tensor<T>> outputs;
  outputs.reserve(frames);
  if (cache) {
    cache->input_shape = lr_clip.shape();
    cache->frames.assign(frames, FrameCache<T>{});
  }
  for (std::size_t t = 0; t < frames; ++t) {
    outputs.push_back(frame_forward(params, lr_clip.slice0(t), hidden, cache ? &cache->frames[t] : nullptr));
  }
  return stack(outputs);
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> TinyRvsrParams<T>::named_tensors() {
  std::vector<std::pair<std::string, Tensor<T>*>> list;
  auto push = [&list](const std::string& name, ConvParam<T>& c) {
    list.emplace_back(name + ".weight", &c.weight);
    list.emplace_back(name + ".bias", &c.bias);
  };
  push("feat", feat);
  push("fuse", fuse);
  for (std::size_t i = 0; i < residual.size(); ++i) {
    push("block" + std::to_string(i / 2) + ".conv" + std::to_string(i % 2), residual[i]);
  }
  push("up1", up1);
  push("up2", up2);
  push("out", this->out);
  return list;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> TinyRvsrParams<T>::named_tensors() const {
  auto mutable_list = const_cast<TinyRvsrParams<T>*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor<T>*>> list;
  list.reserve(mutable_list.size());
  for (auto& [name, ptr] : mutable_list) list.emplace_back(std::move(name), ptr);
  return list;
}

template <typename T>
TinyRvsrParams<T> TinyRvsrParams<T>::zeros_like() const {
  return zero_params<T>(channels, blocks);
}

template <typename T>
std::size_t TinyRvsrParams<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named_tensors()) total += t->size();
  return total;
}

template <typename T>
template <typename U>
TinyRvsrParams<U> TinyRvsrParams<T>::cast() const {
  TinyRvsrParams<U> p;
  p.channels = channels;
  p.blocks = blocks;
  p.feat = cast_conv<T, U>(feat);
  p.fuse = cast_conv<T, U>(fuse);
  for (const auto& r : residual) p.residual.push_back(cast_conv<T, U>(r));
  p.up1 = cast_conv<T, U>(up1);
  p.up2 = cast_conv<T, U>(up2);
  p.out = cast_conv<T, U>(out);
  return p;
}

std::size_t tiny_rvsr_parameter_count(std::size_t channels, std::size_t blocks) {
  const std::size_t c = channels, b = blocks;
  return (90 + 18 * b) * c * c + (64 + 2 * b) * c + 3;
}

template <typename T>
TinyRvsrParams<T> zero_params(std::size_t channels, std::size_t blocks) {
  if (channels == 0) throw InvalidArgument("model channels must be at least 1");
  TinyRvsrParams<T> p;
  p.channels = channels;
  p.blocks = blocks;
  p.feat = zero_conv<T>(channels, kRgb);
  p.fuse = zero_conv<T>(channels, 2 * channels);
  for (std::size_t i = 0; i < 2 * blocks; ++i) p.residual.push_back(zero_conv<T>(channels, channels));
  p.up1 = zero_conv<T>(4 * channels, channels);
  p.up2 = zero_conv<T>(4 * channels, channels);
  p.out = zero_conv<T>(kRgb, channels);
  return p;
}

template <typename T>
TinyRvsrParams<T> init_params(std::uint64_t seed, std::size_t channels, std::size_t blocks) {
  // Drawn in double so both precisions start from the same values.
  TinyRvsrParams<double> p = zero_params<double>(channels, blocks);
  std::mt19937_64 rng(seed);
  const double gain_sq = 2.0 / (1.0 + kLeakySlope * kLeakySlope);
  for (auto& [name, tensor] : p.named_tensors()) {
    if (tensor->rank() != 4) continue;  // biases stay zero
    const double fan_in = static_cast<double>(tensor->dim(1) * tensor->dim(2) * tensor->dim(3));
    const double bound = std::sqrt(3.0 * gain_sq / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : tensor->data()) v = dist(rng);
  }
  if constexpr (std::is_same_v<T, double>) {
    return p;
  } else {
    return p.template cast<T>();
  }
}

template <typename T>
SequenceOutput<T> forward_sequence(const TinyRvsrParams<T>& params, const Tensor<T>& lr_clip) {
  SequenceOutput<T> result;
  result.sr = run_sequence(params, lr_clip, &result.cache);
  return result;
}

template <typename T>
Tensor<T> predict_sequence(const TinyRvsrParams<T>& params, const Tensor<T>& lr_clip) {
  return run_sequence<T>(params, lr_clip, nullptr);
}

template <typename T>
TinyRvsrParams<T> backward_sequence(const TinyRvsrParams<T>& p, const ForwardCache<T>& cache,
                                    const Tensor<T>& grad_sr) {
  check_params(p);
  const Shape& in = cache.input_shape;
  if (in.size() != 5 || cache.frames.size() != in[0]) throw ShapeError("backward_sequence: malformed cache");
  const Shape expected{in[0], in[1], in[2], in[3] * kUpscale, in[4] * kUpscale};
  if (grad_sr.shape() != expected) {
    throw ShapeError("backward_sequence: grad_sr " + shape_str(grad_sr.shape()) + " does not match output " +
                     shape_str(expected));
  }
  if (!cache.frames.empty() && cache.frames.front().blocks.size() != p.blocks) {
    throw ShapeError("backward_sequence: cache was produced by a different model");
  }
  const T a = slope<T>();
  TinyRvsrParams<T> g = p.zeros_like();
  Tensor<T> d_hidden({in[1], p.channels, in[3], in[4]});

  for (std::size_t t = cache.frames.size(); t-- > 0;) {
    const FrameCache<T>& fc = cache.frames[t];
    auto out_g = ops::conv2d_backward(fc.up2_act, p.out.weight, grad_sr.slice0(t));
    accumulate(g.out, out_g);
    auto up2_g = ops::conv2d_backward(
        fc.up1_act, p.up2.weight,
        ops::pixel_shuffle_backward(ops::leaky_relu_backward(fc.up2_pre, out_g.input, a), 2));
    accumulate(g.up2, up2_g);
    auto up1_g = ops::conv2d_backward(
        fc.hidden, p.up1.weight,
        ops::pixel_shuffle_backward(ops::leaky_relu_backward(fc.up1_pre, up2_g.input, a), 2));
    accumulate(g.up1, up1_g);

    // The hidden state feeds both this frame's upsampler and the next frame's fusion.
    Tensor<T> df = std::move(up1_g.input);
    df += d_hidden;
    for (std::size_t b = p.blocks; b-- > 0;) {
      const BlockCache<T>& bc = fc.blocks[b];
      auto second = ops::conv2d_backward(bc.inner_act, p.residual[2 * b + 1].weight, df);
      accumulate(g.residual[2 * b + 1], second);
      auto first = ops::conv2d_backward(bc.input, p.residual[2 * b].weight,
                                        ops::leaky_relu_backward(bc.inner_pre, second.input, a));
      accumulate(g.residual[2 * b], first);
      df += first.input;
    }
    auto fuse_g = ops::conv2d_backward(fc.fused_input, p.fuse.weight, ops::leaky_relu_backward(fc.fuse_pre, df, a));
    accumulate(g.fuse, fuse_g);
    auto [d_features, d_prev_hidden] = ops::split_channels(fuse_g.input, p.channels);
    auto feat_g = ops::conv2d_backward(fc.lr, p.feat.weight, ops::leaky_relu_backward(fc.feat_pre, d_features, a));
    accumulate(g.feat, feat_g);
    d_hidden = std::move(d_prev_hidden);
  }
  return g;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const TinyRvsrParams<T>& params, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["channels"] = params.channels;
  manifest["blocks"] = params.blocks;
  manifest["seed"] = seed;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : params.named_tensors()) {
    const std::string file = name + ".bin";
    save_tensor(dir / file, tensor->template cast<double>());
    manifest["tensors"].push_back({{"name", name}, {"file", file}, {"shape", tensor->shape()}});
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw IoError("checkpoint manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  Checkpoint ck;
  try {
    ck.seed = manifest.at("seed").get<std::uint64_t>();
    ck.params = zero_params<double>(manifest.at("channels").get<std::size_t>(), manifest.at("blocks").get<std::size_t>());
    auto named = ck.params.named_tensors();
    const auto& entries = manifest.at("tensors");
    if (entries.size() != named.size()) throw IoError("checkpoint tensor count does not match model");
    for (std::size_t i = 0; i < named.size(); ++i) {
      if (entries[i].at("name").get<std::string>() != named[i].first) {
        throw IoError("checkpoint tensor " + std::to_string(i) + " is not " + named[i].first);
      }
      Tensor<double> t = load_tensor(dir / entries[i].at("file").get<std::string>());
      if (t.shape() != named[i].second->shape()) {
        throw IoError("checkpoint tensor " + named[i].first + " has shape " + shape_str(t.shape()));
      }
      *named[i].second = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  return ck;
}

template struct TinyRvsrParams<float>;
template struct TinyRvsrParams<double>;
template TinyRvsrParams<double> TinyRvsrParams<float>::cast<double>() const;
template TinyRvsrParams<float> TinyRvsrParams<double>::cast<float>() const;
template TinyRvsrParams<float> TinyRvsrParams<float>::cast<float>() const;
template TinyRvsrParams<double> TinyRvsrParams<double>::cast<double>() const;

#define MGVSR_INSTANTIATE_MODEL(T)                                                                        \
  template TinyRvsrParams<T> init_params<T>(std::uint64_t, std::size_t, std::size_t);                     \
  template TinyRvsrParams<T> zero_params<T>(std::size_t, std::size_t);                                    \
  template SequenceOutput<T> forward_sequence(const TinyRvsrParams<T>&, const Tensor<T>&);                \
  template Tensor<T> predict_sequence(const TinyRvsrParams<T>&, const Tensor<T>&);                        \
  template TinyRvsrParams<T> backward_sequence(const TinyRvsrParams<T>&, const ForwardCache<T>&,          \
                                               const Tensor<T>&);                                         \
  template void save_checkpoint(const std::filesystem::path&, const TinyRvsrParams<T>&, std::uint64_t);

MGVSR_INSTANTIATE_MODEL(float)
MGVSR_INSTANTIATE_MODEL(double)

#undef MGVSR_INSTANTIATE_MODEL

}  // namespace mgvsr
