#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "p2p/autodiff/tensor.hpp"

// Differentiable layer set. Image tensors are [batch, height, width, channels].
namespace p2p::ad {

enum class Mode { train, eval };

struct Scale2d {
  std::size_t y = 1;
  std::size_t x = 1;
};

/// Running statistics of one batch-norm layer. Running estimates follow
/// running = momentum * running + (1 - momentum) * batch.
template <typename T>
struct BatchNormState {
  explicit BatchNormState(std::size_t channels, T momentum = T(0.99), T epsilon = T(1e-5))
      : running_mean(channels, T{0}), running_var(channels, T{1}),
        momentum(momentum), epsilon(epsilon) {}

  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum;
  T epsilon;
};

/// out[n,o] = sum_i x[n,i] * w[i,o] + b[o]
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Per-pixel channel mixing; w is [Cin, Cout].
template <typename T>
Tensor<T> conv2d_1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Per-channel k x k filtering with zero "same" padding; kernel is [k, k, C].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel);

/// depthwise_conv2d followed by conv2d_1x1. k must be odd.
template <typename T>
Tensor<T> separable_conv2d(const Tensor<T>& x, const Tensor<T>& depthwise,
                           const Tensor<T>& pointwise, const Tensor<T>& b);

/// Dense k x k convolution, zero same-padding; kernel is [k, k, Cin, Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& b);

/// out[y, x] = in[y / sy, x / sx]
template <typename T>
Tensor<T> upsample_nearest2d(const Tensor<T>& x, Scale2d scale);

/// Per-channel normalization over batch and spatial positions. In train mode
/// the batch statistics are used and the running estimates are updated; in
/// eval mode the running estimates are used.
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       BatchNormState<T>& state, Mode mode);

/// Zeroes whole (sample, channel) feature maps with probability `rate` and
/// rescales the survivors by 1 / (1 - rate). Identity in eval mode.
template <typename T>
Tensor<T> spatial_dropout(const Tensor<T>& x, double rate, Mode mode, std::mt19937_64& rng);

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Mean of squared differences; target is treated as a constant.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// c * x with a constant factor.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Keeps the top-left height x width window of an image tensor.
template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, std::size_t height, std::size_t width);

/// Elementwise product with a constant mask broadcast over the batch
/// dimension; mask.size() must equal the per-sample element count.
template <typename T>
Tensor<T> multiply_mask(const Tensor<T>& x, std::span<const T> mask);

/// sum_i x[i] * weights[i]; reduces any tensor to a scalar.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

}  // namespace p2p::ad
