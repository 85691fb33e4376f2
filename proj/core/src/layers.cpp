#include "mgvsr/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <string>
#include <vector>

namespace mgvsr::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  std::size_t n, c, h, w, k, kh, kw;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return h * w; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be N x C x H x W, got " + shape_str(input.shape()));
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be K x C x kh x kw, got " + shape_str(weight.shape()));
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) {
    throw ShapeError("conv2d: kernel must be odd-sized, got " + shape_str(weight.shape()));
  }
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2), weight.dim(3)};
}

// cols has patch() rows and pixels() columns.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* plane = img + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(w, w - dx);
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          T* out = row + y * w;
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h || x_lo >= x_hi) {
            std::fill(out, out + w, T{0});
            continue;
          }
          const T* src = plane + sy * w + dx;
          std::fill(out, out + x_lo, T{0});
          std::copy(src + x_lo, src + x_hi, out + x_lo);
          std::fill(out + x_hi, out + w, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const T* cols, const ConvGeometry& g, T* img) {
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t c = 0; c < g.c; ++c) {
    T* plane = img + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
        const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
        const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(w, w - dx);
        for (std::ptrdiff_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + y * w;
          T* dst = plane + sy * w + dx;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

void require_rank4(const Shape& s, const char* where) {
  if (s.size() != 4) throw ShapeError(std::string(where) + ": expected N x C x H x W, got " + shape_str(s));
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const ConvGeometry g = conv_geometry(input, weight);
  if (bias.rank() != 1 || bias.dim(0) != g.k) {
    throw ShapeError("conv2d: bias must have " + std::to_string(g.k) + " entries, got " + shape_str(bias.shape()));
  }
  Tensor<T> out({g.n, g.k, g.h, g.w});
  std::vector<T> cols(g.patch() * g.pixels());
  ConstMatMap<T> wmat(weight.raw(), static_cast<Eigen::Index>(g.k), static_cast<Eigen::Index>(g.patch()));
  ConstMatMap<T> cmat(cols.data(), static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.pixels()));
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.raw() + n * g.c * g.pixels(), g, cols.data());
    MatMap<T> omat(out.raw() + n * g.k * g.pixels(), static_cast<Eigen::Index>(g.k),
                   static_cast<Eigen::Index>(g.pixels()));
    omat.noalias() = wmat * cmat;
    for (std::size_t k = 0; k < g.k; ++k) omat.row(static_cast<Eigen::Index>(k)).array() += bias[k];
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out) {
  const ConvGeometry g = conv_geometry(input, weight);
  if (grad_out.shape() != Shape{g.n, g.k, g.h, g.w}) {
    throw ShapeError("conv2d_backward: grad_out " + shape_str(grad_out.shape()) + " does not match output " +
                     shape_str({g.n, g.k, g.h, g.w}));
  }
  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>({g.k})};
  std::vector<T> cols(g.patch() * g.pixels());
  std::vector<T> dcols(g.patch() * g.pixels());
  const auto rows = static_cast<Eigen::Index>(g.patch());
  const auto pix = static_cast<Eigen::Index>(g.pixels());
  const auto kk = static_cast<Eigen::Index>(g.k);
  ConstMatMap<T> wmat(weight.raw(), kk, rows);
  MatMap<T> dwmat(grads.weight.raw(), kk, rows);
  MatMap<T> cmat(cols.data(), rows, pix);
  MatMap<T> dcmat(dcols.data(), rows, pix);
  for (std::size_t n = 0; n < g.n; ++n) {
    ConstMatMap<T> gmat(grad_out.raw() + n * g.k * g.pixels(), kk, pix);
    im2col(input.raw() + n * g.c * g.pixels(), g, cols.data());
    dwmat.noalias() += gmat * cmat.transpose();
    dcmat.noalias() = wmat.transpose() * gmat;
    col2im_accumulate(dcols.data(), g, grads.input.raw() + n * g.c * g.pixels());
    // Plain loop: Eigen's vectorised sum over an unaligned map starts at an
    // address-dependent element, which makes the result allocation-dependent.
    for (std::size_t k = 0; k < g.k; ++k) {
      const T* row = grad_out.raw() + (n * g.k + k) * g.pixels();
      T sum = 0;
      for (std::size_t i = 0; i < g.pixels(); ++i) sum += row[i];
      grads.bias[k] += sum;
    }
  }
  return grads;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  require_rank4(input.shape(), "pixel_shuffle");
  if (r == 0 || input.dim(1) % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(input.dim(1)) + " channels not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const std::size_t n = input.dim(0), c = input.dim(1) / (r * r), h = input.dim(2), w = input.dim(3);
  Tensor<T> out({n, c, h * r, w * r});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t src_c = ch * r * r + i * r + j;
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at4(b, ch, y * r + i, x * r + j) = input.at4(b, src_c, y, x);
        }
  return out;
}

template <typename T>
Tensor<T> pixel_shuffle_backward(const Tensor<T>& grad_out, std::size_t r) {
  require_rank4(grad_out.shape(), "pixel_shuffle_backward");
  if (r == 0 || grad_out.dim(2) % r != 0 || grad_out.dim(3) % r != 0) {
    throw ShapeError("pixel_shuffle_backward: spatial dims of " + shape_str(grad_out.shape()) +
                     " not divisible by " + std::to_string(r));
  }
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2) / r, w = grad_out.dim(3) / r;
  Tensor<T> out({n, c * r * r, h, w});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const std::size_t dst_c = ch * r * r + i * r + j;
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at4(b, dst_c, y, x) = grad_out.at4(b, ch, y * r + i, x * r + j);
        }
  return out;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope) {
  if (!(slope >= T{0} && slope < T{1})) throw InvalidArgument("leaky_relu: slope must lie in [0, 1)");
  Tensor<T> out(input.shape());
  const T* src = input.raw();
  T* dst = out.raw();
  for (std::size_t i = 0; i < input.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : slope * src[i];
  return out;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out, T slope) {
  input.require_same_shape(grad_out, "leaky_relu_backward");
  Tensor<T> out(input.shape());
  const T* src = input.raw();
  const T* g = grad_out.raw();
  T* dst = out.raw();
  for (std::size_t i = 0; i < input.size(); ++i) dst[i] = src[i] > T{0} ? g[i] : slope * g[i];
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  out += b;
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank4(a.shape(), "concat_channels");
  require_rank4(b.shape(), "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), plane = a.dim(2) * a.dim(3);
  const std::size_t sa = a.dim(1) * plane, sb = b.dim(1) * plane;
  Tensor<T> out({n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    T* dst = out.raw() + i * (sa + sb);
    std::copy(a.raw() + i * sa, a.raw() + (i + 1) * sa, dst);
    std::copy(b.raw() + i * sb, b.raw() + (i + 1) * sb, dst + sa);
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& t, std::size_t first_channels) {
  require_rank4(t.shape(), "split_channels");
  if (first_channels > t.dim(1)) {
    throw ShapeError("split_channels: cannot take " + std::to_string(first_channels) + " of " +
                     std::to_string(t.dim(1)) + " channels");
  }
  const std::size_t n = t.dim(0), plane = t.dim(2) * t.dim(3);
  const std::size_t ca = first_channels, cb = t.dim(1) - first_channels;
  Tensor<T> a({n, ca, t.dim(2), t.dim(3)});
  Tensor<T> b({n, cb, t.dim(2), t.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    const T* src = t.raw() + i * (ca + cb) * plane;
    std::copy(src, src + ca * plane, a.raw() + i * ca * plane);
    std::copy(src + ca * plane, src + (ca + cb) * plane, b.raw() + i * cb * plane);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& input, std::size_t factor) {
  require_rank4(input.shape(), "nearest_upsample");
  if (factor == 0) throw InvalidArgument("nearest_upsample: factor must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ow = w * factor;
  Tensor<T> out({n, c, h * factor, ow});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = input.raw() + p * h * w;
    T* dst = out.raw() + p * h * w * factor * factor;
    for (std::size_t y = 0; y < h; ++y) {
      T* row = dst + y * factor * ow;
      for (std::size_t x = 0; x < w; ++x) std::fill(row + x * factor, row + (x + 1) * factor, src[y * w + x]);
      for (std::size_t i = 1; i < factor; ++i) std::copy(row, row + ow, row + i * ow);
    }
  }
  return out;
}

template <typename T>
Tensor<T> nearest_upsample_backward(const Tensor<T>& grad_out, std::size_t factor) {
  require_rank4(grad_out.shape(), "nearest_upsample_backward");
  if (factor == 0 || grad_out.dim(2) % factor != 0 || grad_out.dim(3) % factor != 0) {
    throw ShapeError("nearest_upsample_backward: " + shape_str(grad_out.shape()) + " not divisible by " +
                     std::to_string(factor));
  }
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t h = grad_out.dim(2) / factor, w = grad_out.dim(3) / factor;
  Tensor<T> out({n, c, h, w});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h * factor; ++y)
        for (std::size_t x = 0; x < w * factor; ++x) out.at4(b, ch, y / factor, x / factor) += grad_out.at4(b, ch, y, x);
  return out;
}

#define MGVSR_INSTANTIATE_LAYERS(T)                                                                  \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> pixel_shuffle_backward(const Tensor<T>&, std::size_t);                          \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                \
  template Tensor<T> leaky_relu_backward(const Tensor<T>&, const Tensor<T>&, T);                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                            \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, std::size_t);            \
  template Tensor<T> nearest_upsample(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> nearest_upsample_backward(const Tensor<T>&, std::size_t);

MGVSR_INSTANTIATE_LAYERS(float)
MGVSR_INSTANTIATE_LAYERS(double)

#undef MGVSR_INSTANTIATE_LAYERS

}  // namespace mgvsr::ops
