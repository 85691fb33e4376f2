#pragma once

#include <cstddef>
#include <utility>

#include "mgvsr/tensor.hpp"

namespace mgvsr::ops {

// Every layer exposes an explicit forward and backward; there is no graph.
// All layers are instantiated for float (training) and double (verification).

/// Gradients of one convolution: w.r.t. its input, weight and bias.
template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// Stride-1, zero "same" padding cross-correlation.
/// input N x C x H x W, weight K x C x kh x kw (odd kh, kw), bias K.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

/// Gradients of sum(grad_out * conv2d_forward(input, weight, bias)).
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_out);

/// N x (C r^2) x H x W -> N x C x rH x rW, sub-pixel layout:
/// out[n, c, y*r + i, x*r + j] = in[n, c*r*r + i*r + j, y, x].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r);

/// Inverse permutation of pixel_shuffle; also its backward.
template <typename T>
Tensor<T> pixel_shuffle_backward(const Tensor<T>& grad_out, std::size_t r);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope);

/// `input` is the pre-activation seen by the forward pass.
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out, T slope);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Concatenate two N x C x H x W tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Split along channels after the first `first_channels`; the backward of concat.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& t, std::size_t first_channels);

/// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Tensor<T> nearest_upsample(const Tensor<T>& input, std::size_t factor);

/// Sums the gradient over each factor x factor block.
template <typename T>
Tensor<T> nearest_upsample_backward(const Tensor<T>& grad_out, std::size_t factor);

}  // namespace mgvsr::ops
