#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "p2p/autodiff/checkpoint.hpp"
#include "p2p/autodiff/ops.hpp"
#include "p2p/autodiff/tensor.hpp"
#include "p2p/pressure/pressure.hpp"

namespace p2p::model {

/// Layer sizes of the pose-to-pressure network. The defaults describe the
/// full-size model: 48 -> FC 6144 -> 4x3x512 -> four upsampling residual
/// blocks (8x3x256, 16x6x128, 32x12x64, 64x24x64) -> 60x21x2 head.
struct PressNetConfig {
  std::size_t input_dim = 48;
  std::size_t stem_fc_out = 6144;
  std::array<std::size_t, 3> stem_reshape{4, 3, 512};
  std::vector<ad::Scale2d> block_scales{{2, 1}, {2, 2}, {2, 2}, {2, 2}};
  std::vector<std::size_t> block_out_channels{256, 128, 64, 64};
  std::size_t block_fc_bottleneck = 10;
  std::vector<std::size_t> head_fc_sizes{10, 2520};
  std::size_t head_crop_h = 60;
  std::size_t head_crop_w = 21;
  std::size_t output_channels = 2;
  double dropout_rate = 0.1;
  double leaky_alpha = 0.2;

  struct Resolution {
    std::size_t h, w, c;
  };

  /// Throws ConfigError naming the first broken relation, e.g.
  /// "stem_fc_out (6000) != 4*3*512 (6144)".
  void validate() const;
  /// Spatial shape after the stem reshape and after every block.
  [[nodiscard]] std::vector<Resolution> shape_chain() const;
  /// Elements per output sample: crop_h * crop_w * output_channels.
  [[nodiscard]] std::size_t output_size() const;
};

void save_config(const std::filesystem::path& path, const PressNetConfig& cfg);
PressNetConfig load_config(const std::filesystem::path& path);

/// Training switches for one forward pass. `rng` drives spatial dropout and
/// may be null in eval mode.
struct ForwardContext {
  ad::Mode mode = ad::Mode::eval;
  std::mt19937_64* rng = nullptr;
};

/// out = (input_scale * x) W + b. Layers fed a flattened feature map keep
/// unit-scale weights and apply 1/sqrt(fan_in) at run time, so one Adam step
/// moves their output by O(lr * sqrt(fan_in)) instead of O(lr * fan_in).
template <typename T>
struct Dense {
  ad::Tensor<T> weight;  // [in, out]
  ad::Tensor<T> bias;    // [out]
  T input_scale = T{1};
};

/// Convolution -> batch norm, with a separable (depthwise + pointwise) or
/// plain 1x1 kernel.
template <typename T>
struct ConvBn {
  std::size_t kernel = 1;
  ad::Tensor<T> depthwise;  // [k, k, Cin]; unused for 1x1
  ad::Tensor<T> pointwise;  // [Cin, Cout]
  ad::Tensor<T> bias;       // [Cout]
  ad::Tensor<T> gamma;
  ad::Tensor<T> beta;
  ad::BatchNormState<T> bn{1};
};

template <typename T>
struct ResidualBlock {
  ad::Scale2d scale;
  PressNetConfig::Resolution out;
  ConvBn<T> conv5x5;
  ConvBn<T> conv3x3;
  ConvBn<T> conv1x1;
  Dense<T> fc_bottleneck;
  Dense<T> fc_expand;
};

template <typename T>
struct Head {
  ad::Tensor<T> conv_kernel;  // [3, 3, Cin, output_channels]
  ad::Tensor<T> conv_bias;
  std::vector<Dense<T>> fc;
};

/// out = conv5x5(u) + conv3x3(u) + conv1x1(u) + fc(u), u = upsample(x).
/// The 5x5 and 3x3 paths are conv -> BN -> spatial dropout -> leaky ReLU;
/// the 1x1 path is conv -> BN; the FC path is flatten -> FC(bottleneck) ->
/// leaky ReLU -> FC(out size) -> reshape.
template <typename T>
ad::Tensor<T> residual_block_forward(const ad::Tensor<T>& x, ResidualBlock<T>& block,
                                     const PressNetConfig& cfg, ForwardContext& ctx);

/// sigmoid(crop(conv3x3(x)) + reshape(fc(flatten(x)))) * footmask.
template <typename T>
ad::Tensor<T> head_forward(const ad::Tensor<T>& x, Head<T>& head, std::span<const T> footmask,
                           const PressNetConfig& cfg, ForwardContext& ctx);

template <typename T>
class PressNet {
 public:
  /// `footmask` is in [row, col, channel] order, output_size() entries.
  /// Parameters are drawn from a seeded fan-in scaled uniform distribution;
  /// biases start at zero, batch-norm gamma at one and beta at zero.
  PressNet(PressNetConfig cfg, std::vector<T> footmask, std::uint64_t seed);

  // Layers hold shared tensor handles; a copy would alias the parameters.
  PressNet(const PressNet&) = delete;
  PressNet& operator=(const PressNet&) = delete;
  PressNet(PressNet&&) noexcept = default;
  PressNet& operator=(PressNet&&) noexcept = default;

  /// [B, input_dim] normalized poses -> [B, crop_h, crop_w, output_channels].
  ad::Tensor<T> forward(const ad::Tensor<T>& poses, ForwardContext& ctx);

  [[nodiscard]] const PressNetConfig& config() const { return cfg_; }
  [[nodiscard]] std::span<ad::Parameter<T>> parameters() { return params_; }
  [[nodiscard]] std::span<const ad::Parameter<T>> parameters() const { return params_; }
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::span<const T> footmask() const { return footmask_; }

  [[nodiscard]] std::vector<ResidualBlock<T>>& blocks() { return blocks_; }
  [[nodiscard]] Head<T>& head() { return head_; }

  /// Parameters followed by batch-norm running statistics.
  [[nodiscard]] ad::Checkpoint to_checkpoint() const;
  /// Copies every parameter and buffer from `cp`; names and shapes must match.
  void load_checkpoint(const ad::Checkpoint& cp);

  /// Full-precision copy of parameters and buffers, for in-memory restore.
  [[nodiscard]] std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& state);

 private:
  ad::Tensor<T> make_param(const std::string& name, ad::Shape shape, std::size_t fan_in,
                           std::mt19937_64& rng);
  ad::Tensor<T> make_constant_param(const std::string& name, ad::Shape shape, T value);
  Dense<T> make_dense(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
                      bool runtime_scaled = false);
  ConvBn<T> make_conv(const std::string& name, std::size_t kernel, std::size_t cin, std::size_t cout,
                      std::mt19937_64& rng);

  /// Calls fn(name, running-stat vector) for every batch-norm buffer.
  template <typename Self, typename Fn>
  static void for_each_buffer(Self& self, Fn&& fn);

  PressNetConfig cfg_;
  std::vector<T> footmask_;
  std::vector<ad::Parameter<T>> params_;
  Dense<T> stem_;
  std::vector<ResidualBlock<T>> blocks_;
  Head<T> head_;
};

/// Full-size model with a file-order insole mask.
template <typename T>
PressNet<T> build_pressnet(const PressNetConfig& cfg, const pressure::FootMask& mask, std::uint64_t seed);

extern template class PressNet<float>;
extern template class PressNet<double>;

}  // namespace p2p::model
