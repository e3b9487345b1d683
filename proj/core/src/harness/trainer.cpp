#include "p2p/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "../model/config_json.hpp"
#include "json.hpp"
#include "p2p/autodiff/adam.hpp"
#include "p2p/error.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(lr_initial > 0.0) || !(lr_late > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("train: dropout_rate must lie in [0, 1)");
}

double TrainConfig::learning_rate(std::size_t epoch) const { return epoch <= lr_drop_epoch ? lr_initial : lr_late; }

TrainConfig load_train_config(const fs::path& path, model::PressNetConfig* model_cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open training config " + path.string());
  TrainConfig cfg;
  try {
    const json j = json::parse(in);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr_initial = j.value("lr_initial", cfg.lr_initial);
    cfg.lr_late = j.value("lr_late", cfg.lr_late);
    cfg.lr_drop_epoch = j.value("lr_drop_epoch", cfg.lr_drop_epoch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    const auto precision = j.value("precision", std::string("float32"));
    if (precision == "float32") {
      cfg.precision = Precision::float32;
    } else if (precision == "float64") {
      cfg.precision = Precision::float64;
    } else {
      throw ConfigError("train: precision must be float32 or float64, got '" + precision + "'");
    }
    if (model_cfg) {
      *model_cfg = j.contains("model") ? model::config_from_json(j.at("model")) : model::PressNetConfig{};
      model_cfg->dropout_rate = cfg.dropout_rate;
      model_cfg->validate();
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_train_config(const fs::path& path, const TrainConfig& cfg, const model::PressNetConfig& model_cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr_initial"] = cfg.lr_initial;
  j["lr_late"] = cfg.lr_late;
  j["lr_drop_epoch"] = cfg.lr_drop_epoch;
  j["seed"] = cfg.seed;
  j["dropout_rate"] = cfg.dropout_rate;
  j["precision"] = cfg.precision == Precision::float32 ? "float32" : "float64";
  j["max_steps"] = cfg.max_steps;
  j["model"] = model::config_to_json(model_cfg);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_train_log(const fs::path& path, const TrainResult& result) {
  json epochs = json::array();
  for (const auto& e : result.epochs) {
    json je{{"epoch", e.epoch}, {"learning_rate", e.learning_rate}, {"train_loss", e.train_loss}};
    je["validation_loss"] = e.validation_loss ? json(*e.validation_loss) : json(nullptr);
    epochs.push_back(je);
  }
  json j{{"epochs", epochs},
         {"step_losses", result.step_losses},
         {"step_learning_rates", result.step_learning_rates},
         {"best_epoch", result.best_epoch}};
  j["best_validation_loss"] = result.best_validation_loss ? json(*result.best_validation_loss) : json(nullptr);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

void check_data(const TensorData& data, std::size_t input_dim, std::size_t output_size, const char* what) {
  if (data.inputs.size() != data.count * input_dim || data.targets.size() != data.count * output_size) {
    throw DimensionError(std::string(what) + " arrays do not match the model's input/output sizes");
  }
}

template <typename T>
ad::Tensor<T> gather_rows(std::span<const double> source, std::span<const std::size_t> rows, ad::Shape shape) {
  const std::size_t width = ad::element_count(shape) / rows.size();
  std::vector<T> values(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double* src = source.data() + rows[r] * width;
    std::transform(src, src + width, values.begin() + static_cast<std::ptrdiff_t>(r * width),
                   [](double v) { return static_cast<T>(v); });
  }
  return ad::Tensor<T>::constant(std::move(shape), std::move(values));
}

template <typename T>
ad::Shape output_shape(const model::PressNet<T>& net, std::size_t batch) {
  const auto& c = net.config();
  return {batch, c.head_crop_h, c.head_crop_w, c.output_channels};
}

}  // namespace

template <typename T>
TrainResult train_model(model::PressNet<T>& net, const TensorData& train, const TensorData* validation,
                        const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  const auto& mc = net.config();
  check_data(train, mc.input_dim, mc.output_size(), "training");
  if (validation) check_data(*validation, mc.input_dim, mc.output_size(), "validation");
  if (train.count < cfg.batch_size) {
    throw DataError("training set has " + std::to_string(train.count) + " frames, fewer than one batch of " +
                    std::to_string(cfg.batch_size));
  }

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed + 1);
  ad::AdamState adam;
  TrainResult result;
  std::optional<std::vector<std::vector<T>>> best;
  std::vector<std::size_t> order(train.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batches = train.count / cfg.batch_size;
  std::size_t steps = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    adam.learning_rate = cfg.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      if (cfg.max_steps && steps >= cfg.max_steps) break;
      const std::span<const std::size_t> rows(order.data() + b * cfg.batch_size, cfg.batch_size);
      const auto x = gather_rows<T>(train.inputs, rows, {cfg.batch_size, mc.input_dim});
      const auto y = gather_rows<T>(train.targets, rows, output_shape(net, cfg.batch_size));
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                                " (lr " + std::to_string(adam.learning_rate) + ")";
      ad::Tensor<T> loss;
      try {
        model::ForwardContext ctx{ad::Mode::train, &dropout_rng};
        loss = ad::mse_loss(net.forward(x, ctx), y);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at " + where + ": " + e.what());
      }
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) throw NumericalError("training loss is not finite at " + where);
      loss.backward();
      ad::adam_step<T>(net.parameters(), adam);
      result.step_losses.push_back(value);
      result.step_learning_rates.push_back(adam.learning_rate);
      loss_sum += value;
      ++loss_count;
      ++steps;
    }
    if (loss_count == 0) break;

    EpochRecord record{epoch, adam.learning_rate, loss_sum / static_cast<double>(loss_count), std::nullopt};
    if (validation && validation->count > 0) {
      record.validation_loss = evaluate_loss(net, *validation);
      if (!result.best_validation_loss || *record.validation_loss < *result.best_validation_loss) {
        result.best_validation_loss = record.validation_loss;
        result.best_epoch = epoch;
        best = net.snapshot();
      }
    }
    result.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  if (best) net.restore(*best);
  return result;
}

template <typename T>
double evaluate_loss(model::PressNet<T>& net, const TensorData& data, std::size_t batch_size) {
  if (data.count == 0) throw DataError("cannot evaluate on an empty set");
  const auto out = predict(net, data.inputs, data.count, batch_size);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - data.targets[i];
    acc += d * d;
  }
  return acc / static_cast<double>(out.size());
}

template <typename T>
std::vector<double> predict(model::PressNet<T>& net, std::span<const double> inputs, std::size_t count,
                            std::size_t batch_size) {
  const auto& mc = net.config();
  if (inputs.size() != count * mc.input_dim) throw DimensionError("predict: input array has the wrong size");
  if (batch_size == 0) throw ConfigError("predict: batch_size must be positive");
  std::vector<double> out;
  out.reserve(count * mc.output_size());
  model::ForwardContext ctx{ad::Mode::eval, nullptr};
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t n = std::min(batch_size, count - start);
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), start);
    const auto x = gather_rows<T>(inputs, rows, {n, mc.input_dim});
    const auto y = net.forward(x, ctx);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

template TrainResult train_model<float>(model::PressNet<float>&, const TensorData&, const TensorData*,
                                        const TrainConfig&, const std::function<void(const EpochRecord&)>&);
template TrainResult train_model<double>(model::PressNet<double>&, const TensorData&, const TensorData*,
                                         const TrainConfig&, const std::function<void(const EpochRecord&)>&);
template double evaluate_loss<float>(model::PressNet<float>&, const TensorData&, std::size_t);
template double evaluate_loss<double>(model::PressNet<double>&, const TensorData&, std::size_t);
template std::vector<double> predict<float>(model::PressNet<float>&, std::span<const double>, std::size_t,
                                            std::size_t);
template std::vector<double> predict<double>(model::PressNet<double>&, std::span<const double>, std::size_t,
                                             std::size_t);

}  // namespace p2p::harness
