#include "p2p/model/pressnet.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "config_json.hpp"
#include "p2p/error.hpp"

namespace p2p::model {

using ad::Mode;
using ad::Tensor;

void PressNetConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid PressNet config: " + what); };
  const std::size_t reshape_count = stem_reshape[0] * stem_reshape[1] * stem_reshape[2];
  if (input_dim == 0) fail("input_dim must be positive");
  if (stem_fc_out != reshape_count) {
    fail("stem_fc_out (" + std::to_string(stem_fc_out) + ") != " + std::to_string(stem_reshape[0]) + "*" +
         std::to_string(stem_reshape[1]) + "*" + std::to_string(stem_reshape[2]) + " (" +
         std::to_string(reshape_count) + ")");
  }
  if (reshape_count == 0) fail("stem_reshape dimensions must be positive");
  if (block_scales.size() != block_out_channels.size()) {
    fail("block_scales has " + std::to_string(block_scales.size()) + " entries but block_out_channels has " +
         std::to_string(block_out_channels.size()));
  }
  for (std::size_t i = 0; i < block_scales.size(); ++i) {
    if (block_scales[i].y < 1 || block_scales[i].x < 1) fail("block scale factors must be >= 1");
    if (block_out_channels[i] == 0) fail("block channel counts must be positive");
  }
  if (block_fc_bottleneck == 0) fail("block_fc_bottleneck must be positive");
  if (head_fc_sizes.empty()) fail("head_fc_sizes must not be empty");
  if (output_channels == 0) fail("output_channels must be positive");
  const auto last = shape_chain().back();
  if (head_crop_h == 0 || head_crop_w == 0 || head_crop_h > last.h || head_crop_w > last.w) {
    fail("head crop " + std::to_string(head_crop_h) + "x" + std::to_string(head_crop_w) +
         " does not fit final resolution " + std::to_string(last.h) + "x" + std::to_string(last.w));
  }
  if (head_fc_sizes.back() != output_size()) {
    fail("last head FC size (" + std::to_string(head_fc_sizes.back()) + ") != " + std::to_string(head_crop_h) +
         "*" + std::to_string(head_crop_w) + "*" + std::to_string(output_channels) + " (" +
         std::to_string(output_size()) + ")");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  if (!(leaky_alpha > 0.0 && leaky_alpha < 1.0)) fail("leaky_alpha must lie in (0, 1)");
}

std::vector<PressNetConfig::Resolution> PressNetConfig::shape_chain() const {
  std::vector<Resolution> chain{{stem_reshape[0], stem_reshape[1], stem_reshape[2]}};
  for (std::size_t i = 0; i < block_scales.size() && i < block_out_channels.size(); ++i) {
    const auto& prev = chain.back();
    chain.push_back({prev.h * block_scales[i].y, prev.w * block_scales[i].x, block_out_channels[i]});
  }
  return chain;
}

std::size_t PressNetConfig::output_size() const { return head_crop_h * head_crop_w * output_channels; }

nlohmann::json config_to_json(const PressNetConfig& cfg) {
  nlohmann::json j;
  j["input_dim"] = cfg.input_dim;
  j["stem_fc_out"] = cfg.stem_fc_out;
  j["stem_reshape"] = cfg.stem_reshape;
  auto scales = nlohmann::json::array();
  for (const auto& s : cfg.block_scales) scales.push_back({s.y, s.x});
  j["block_scales"] = scales;
  j["block_out_channels"] = cfg.block_out_channels;
  j["block_fc_bottleneck"] = cfg.block_fc_bottleneck;
  j["head_fc_sizes"] = cfg.head_fc_sizes;
  j["head_crop"] = {cfg.head_crop_h, cfg.head_crop_w};
  j["output_channels"] = cfg.output_channels;
  j["dropout_rate"] = cfg.dropout_rate;
  j["leaky_alpha"] = cfg.leaky_alpha;
  return j;
}

PressNetConfig config_from_json(const nlohmann::json& j) {
  PressNetConfig cfg;
  cfg.input_dim = j.value("input_dim", cfg.input_dim);
  cfg.stem_fc_out = j.value("stem_fc_out", cfg.stem_fc_out);
  if (j.contains("stem_reshape")) cfg.stem_reshape = j.at("stem_reshape").get<std::array<std::size_t, 3>>();
  if (j.contains("block_scales")) {
    cfg.block_scales.clear();
    for (const auto& s : j.at("block_scales")) {
      cfg.block_scales.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
  }
  if (j.contains("block_out_channels")) {
    cfg.block_out_channels = j.at("block_out_channels").get<std::vector<std::size_t>>();
  }
  cfg.block_fc_bottleneck = j.value("block_fc_bottleneck", cfg.block_fc_bottleneck);
  if (j.contains("head_fc_sizes")) cfg.head_fc_sizes = j.at("head_fc_sizes").get<std::vector<std::size_t>>();
  if (j.contains("head_crop")) {
    cfg.head_crop_h = j.at("head_crop").at(0).get<std::size_t>();
    cfg.head_crop_w = j.at("head_crop").at(1).get<std::size_t>();
  }
  cfg.output_channels = j.value("output_channels", cfg.output_channels);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.leaky_alpha = j.value("leaky_alpha", cfg.leaky_alpha);
  cfg.validate();
  return cfg;
}

void save_config(const std::filesystem::path& path, const PressNetConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model config " + path.string());
  out << config_to_json(cfg).dump(2) << '\n';
}

PressNetConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Dense<T>& d) {
  if (d.input_scale == T{1}) return ad::fully_connected(x, d.weight, d.bias);
  return ad::fully_connected(ad::scale(x, d.input_scale), d.weight, d.bias);
}

template <typename T>
Tensor<T> conv_bn_forward(const Tensor<T>& x, ConvBn<T>& c, Mode mode) {
  const Tensor<T> conv = c.kernel == 1 ? ad::conv2d_1x1(x, c.pointwise, c.bias)
                                       : ad::separable_conv2d(x, c.depthwise, c.pointwise, c.bias);
  return ad::batch_norm2d(conv, c.gamma, c.beta, c.bn, mode);
}

std::mt19937_64& dropout_rng(ForwardContext& ctx, double rate) {
  if (ctx.mode == Mode::train && rate > 0.0 && ctx.rng == nullptr) {
    throw ConfigError("train-mode forward with dropout needs an RNG");
  }
  static thread_local std::mt19937_64 unused;
  return ctx.rng ? *ctx.rng : unused;
}

}  // namespace

template <typename T>
Tensor<T> residual_block_forward(const Tensor<T>& x, ResidualBlock<T>& block, const PressNetConfig& cfg,
                                 ForwardContext& ctx) {
  if (x.rank() != 4) throw DimensionError("residual block expects [B,H,W,C], got " + ad::to_string(x.shape()));
  const T alpha = static_cast<T>(cfg.leaky_alpha);
  auto& rng = dropout_rng(ctx, cfg.dropout_rate);
  const std::size_t B = x.dim(0);

  const Tensor<T> u = ad::upsample_nearest2d(x, block.scale);
  if (u.dim(1) != block.out.h || u.dim(2) != block.out.w) {
    throw DimensionError("residual block: upsampled input " + ad::to_string(u.shape()) +
                         " does not match block resolution " + std::to_string(block.out.h) + "x" +
                         std::to_string(block.out.w));
  }

  auto activated = [&](ConvBn<T>& c) {
    return ad::leaky_relu(ad::spatial_dropout(conv_bn_forward(u, c, ctx.mode), cfg.dropout_rate, ctx.mode, rng),
                          alpha);
  };
  const Tensor<T> p5 = activated(block.conv5x5);
  const Tensor<T> p3 = activated(block.conv3x3);
  const Tensor<T> p1 = conv_bn_forward(u, block.conv1x1, ctx.mode);

  const Tensor<T> flat = ad::reshape(u, {B, u.size() / B});
  const Tensor<T> hidden = ad::leaky_relu(dense_forward(flat, block.fc_bottleneck), alpha);
  const Tensor<T> fc = ad::reshape(dense_forward(hidden, block.fc_expand), {B, block.out.h, block.out.w, block.out.c});

  return ad::add(ad::add(ad::add(p5, p3), p1), fc);
}

template <typename T>
Tensor<T> head_forward(const Tensor<T>& x, Head<T>& head, std::span<const T> footmask, const PressNetConfig& cfg,
                       ForwardContext&) {
  if (x.rank() != 4) throw DimensionError("head expects [B,H,W,C], got " + ad::to_string(x.shape()));
  if (footmask.size() != cfg.output_size()) {
    throw DimensionError("footmask has " + std::to_string(footmask.size()) + " entries, head produces " +
                         std::to_string(cfg.output_size()));
  }
  const T alpha = static_cast<T>(cfg.leaky_alpha);
  const std::size_t B = x.dim(0);

  const Tensor<T> conv = ad::crop2d(ad::conv2d(x, head.conv_kernel, head.conv_bias), cfg.head_crop_h, cfg.head_crop_w);

  Tensor<T> fc = ad::reshape(x, {B, x.size() / B});
  for (std::size_t i = 0; i < head.fc.size(); ++i) {
    fc = dense_forward(fc, head.fc[i]);
    if (i + 1 < head.fc.size()) fc = ad::leaky_relu(fc, alpha);
  }
  fc = ad::reshape(fc, {B, cfg.head_crop_h, cfg.head_crop_w, cfg.output_channels});

  // Sigmoid first, then the mask, so off-mask prexels are exactly zero.
  return ad::multiply_mask(ad::sigmoid(ad::add(conv, fc)), footmask);
}

template <typename T>
PressNet<T>::PressNet(PressNetConfig cfg, std::vector<T> footmask, std::uint64_t seed)
    : cfg_(std::move(cfg)), footmask_(std::move(footmask)) {
  cfg_.validate();
  if (footmask_.size() != cfg_.output_size()) {
    throw DimensionError("footmask has " + std::to_string(footmask_.size()) + " entries, expected " +
                         std::to_string(cfg_.output_size()));
  }
  std::mt19937_64 rng(seed);
  stem_ = make_dense("stem.fc", cfg_.input_dim, cfg_.stem_fc_out, rng);

  const auto chain = cfg_.shape_chain();
  for (std::size_t i = 0; i < cfg_.block_scales.size(); ++i) {
    const auto in = chain[i];
    const auto out = chain[i + 1];
    const std::string p = "block" + std::to_string(i + 1);
    ResidualBlock<T> b;
    b.scale = cfg_.block_scales[i];
    b.out = out;
    b.conv5x5 = make_conv(p + ".conv5x5", 5, in.c, out.c, rng);
    b.conv3x3 = make_conv(p + ".conv3x3", 3, in.c, out.c, rng);
    b.conv1x1 = make_conv(p + ".conv1x1", 1, in.c, out.c, rng);
    b.fc_bottleneck = make_dense(p + ".fc.0", out.h * out.w * in.c, cfg_.block_fc_bottleneck, rng, true);
    b.fc_expand = make_dense(p + ".fc.1", cfg_.block_fc_bottleneck, out.h * out.w * out.c, rng);
    blocks_.push_back(std::move(b));
  }

  const auto last = chain.back();
  head_.conv_kernel = make_param("head.conv3x3.kernel", {3, 3, last.c, cfg_.output_channels}, 9 * last.c, rng);
  head_.conv_bias = make_constant_param("head.conv3x3.bias", {cfg_.output_channels}, T{0});
  std::size_t width = last.h * last.w * last.c;
  for (std::size_t i = 0; i < cfg_.head_fc_sizes.size(); ++i) {
    head_.fc.push_back(make_dense("head.fc." + std::to_string(i), width, cfg_.head_fc_sizes[i], rng, i == 0));
    width = cfg_.head_fc_sizes[i];
  }
}

template <typename T>
Tensor<T> PressNet<T>::make_param(const std::string& name, ad::Shape shape, std::size_t fan_in,
                                  std::mt19937_64& rng) {
  const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> values(ad::element_count(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  auto t = Tensor<T>::leaf(std::move(shape), std::move(values), true);
  params_.push_back({name, t});
  return t;
}

template <typename T>
Tensor<T> PressNet<T>::make_constant_param(const std::string& name, ad::Shape shape, T value) {
  const auto n = ad::element_count(shape);
  auto t = Tensor<T>::leaf(std::move(shape), std::vector<T>(n, value), true);
  params_.push_back({name, t});
  return t;
}

template <typename T>
Dense<T> PressNet<T>::make_dense(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng,
                                 bool runtime_scaled) {
  Dense<T> d;
  d.weight = make_param(name + ".weight", {in, out}, runtime_scaled ? 1 : in, rng);
  if (runtime_scaled) d.input_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
  d.bias = make_constant_param(name + ".bias", {out}, T{0});
  return d;
}

template <typename T>
ConvBn<T> PressNet<T>::make_conv(const std::string& name, std::size_t kernel, std::size_t cin, std::size_t cout,
                                 std::mt19937_64& rng) {
  ConvBn<T> c;
  c.kernel = kernel;
  if (kernel == 1) {
    c.pointwise = make_param(name + ".weight", {cin, cout}, cin, rng);
  } else {
    c.depthwise = make_param(name + ".depthwise", {kernel, kernel, cin}, kernel * kernel, rng);
    c.pointwise = make_param(name + ".pointwise", {cin, cout}, cin, rng);
  }
  c.bias = make_constant_param(name + ".bias", {cout}, T{0});
  c.gamma = make_constant_param(name + ".bn.gamma", {cout}, T{1});
  c.beta = make_constant_param(name + ".bn.beta", {cout}, T{0});
  c.bn = ad::BatchNormState<T>(cout);
  return c;
}

template <typename T>
Tensor<T> PressNet<T>::forward(const Tensor<T>& poses, ForwardContext& ctx) {
  if (poses.rank() != 2 || poses.dim(1) != cfg_.input_dim) {
    throw DimensionError("PressNet expects [B," + std::to_string(cfg_.input_dim) + "] input, got " +
                         ad::to_string(poses.shape()));
  }
  for (const T v : poses.data()) {
    if (!std::isfinite(v)) throw NumericalError("PressNet input contains a non-finite value");
  }
  const std::size_t B = poses.dim(0);
  const T alpha = static_cast<T>(cfg_.leaky_alpha);
  Tensor<T> h = ad::leaky_relu(dense_forward(poses, stem_), alpha);
  h = ad::reshape(h, {B, cfg_.stem_reshape[0], cfg_.stem_reshape[1], cfg_.stem_reshape[2]});
  for (auto& block : blocks_) h = residual_block_forward(h, block, cfg_, ctx);
  return head_forward(h, head_, std::span<const T>(footmask_), cfg_, ctx);
}

template <typename T>
std::size_t PressNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

template <typename T>
template <typename Self, typename Fn>
void PressNet<T>::for_each_buffer(Self& self, Fn&& fn) {
  for (std::size_t i = 0; i < self.blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i + 1);
    auto& b = self.blocks_[i];
    fn(p + ".conv5x5.bn.running_mean", b.conv5x5.bn.running_mean);
    fn(p + ".conv5x5.bn.running_var", b.conv5x5.bn.running_var);
    fn(p + ".conv3x3.bn.running_mean", b.conv3x3.bn.running_mean);
    fn(p + ".conv3x3.bn.running_var", b.conv3x3.bn.running_var);
    fn(p + ".conv1x1.bn.running_mean", b.conv1x1.bn.running_mean);
    fn(p + ".conv1x1.bn.running_var", b.conv1x1.bn.running_var);
  }
}

template <typename T>
ad::Checkpoint PressNet<T>::to_checkpoint() const {
  ad::Checkpoint cp;
  for (const auto& p : params_) {
    cp.tensors.push_back({p.name, p.tensor.shape(), std::vector<float>(p.tensor.data().begin(), p.tensor.data().end())});
  }
  for_each_buffer(*this, [&](const std::string& name, const std::vector<T>& values) {
    cp.tensors.push_back({name, {values.size()}, std::vector<float>(values.begin(), values.end())});
  });
  return cp;
}

template <typename T>
void PressNet<T>::load_checkpoint(const ad::Checkpoint& cp) {
  auto fetch = [&](const std::string& name, const ad::Shape& shape) -> const ad::NamedArray& {
    const auto* entry = cp.find(name);
    if (!entry) throw DataError("checkpoint is missing " + name);
    if (entry->shape != shape) {
      throw DataError("checkpoint entry " + name + " has shape " + ad::to_string(entry->shape) + ", model expects " +
                      ad::to_string(shape));
    }
    return *entry;
  };
  for (auto& p : params_) {
    const auto& e = fetch(p.name, p.tensor.shape());
    auto dst = p.tensor.mutable_data();
    std::copy(e.values.begin(), e.values.end(), dst.begin());
  }
  for_each_buffer(*this, [&](const std::string& name, std::vector<T>& values) {
    const auto& e = fetch(name, {values.size()});
    std::copy(e.values.begin(), e.values.end(), values.begin());
  });
}

template <typename T>
std::vector<std::vector<T>> PressNet<T>::snapshot() const {
  std::vector<std::vector<T>> state;
  for (const auto& p : params_) state.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  for_each_buffer(*this, [&](const std::string&, const std::vector<T>& values) { state.push_back(values); });
  return state;
}

template <typename T>
void PressNet<T>::restore(const std::vector<std::vector<T>>& state) {
  std::size_t i = 0;
  auto next = [&](std::size_t size) -> const std::vector<T>& {
    if (i >= state.size() || state[i].size() != size) throw DimensionError("snapshot does not match the model");
    return state[i++];
  };
  for (auto& p : params_) {
    const auto& v = next(p.tensor.size());
    std::copy(v.begin(), v.end(), p.tensor.mutable_data().begin());
  }
  for_each_buffer(*this, [&](const std::string&, std::vector<T>& values) { values = next(values.size()); });
  if (i != state.size()) throw DimensionError("snapshot does not match the model");
}

template <typename T>
PressNet<T> build_pressnet(const PressNetConfig& cfg, const pressure::FootMask& mask, std::uint64_t seed) {
  if (cfg.head_crop_h != pressure::kRows || cfg.head_crop_w != pressure::kCols ||
      cfg.output_channels != pressure::kFeet) {
    throw ConfigError("build_pressnet: insole masks need a 60x21x2 head");
  }
  std::vector<double> m(mask.valid.begin(), mask.valid.end());
  return PressNet<T>(cfg, pressure::to_channels_last<T>(m), seed);
}

template class PressNet<float>;
template class PressNet<double>;
template PressNet<float> build_pressnet<float>(const PressNetConfig&, const pressure::FootMask&, std::uint64_t);
template PressNet<double> build_pressnet<double>(const PressNetConfig&, const pressure::FootMask&, std::uint64_t);
template Tensor<float> residual_block_forward(const Tensor<float>&, ResidualBlock<float>&, const PressNetConfig&,
                                              ForwardContext&);
template Tensor<double> residual_block_forward(const Tensor<double>&, ResidualBlock<double>&, const PressNetConfig&,
                                               ForwardContext&);
template Tensor<float> head_forward(const Tensor<float>&, Head<float>&, std::span<const float>, const PressNetConfig&,
                                    ForwardContext&);
template Tensor<double> head_forward(const Tensor<double>&, Head<double>&, std::span<const double>,
                                     const PressNetConfig&, ForwardContext&);

}  // namespace p2p::model
