#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p2p/harness/dataset.hpp"
#include "p2p/model/pressnet.hpp"

namespace p2p::harness {

enum class Precision { float32, float64 };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr_initial = 1e-3;
  double lr_late = 1e-5;
  /// Epochs 1..lr_drop_epoch run at lr_initial, later ones at lr_late.
  std::size_t lr_drop_epoch = 12;
  std::uint64_t seed = 42;
  double dropout_rate = 0.1;
  Precision precision = Precision::float32;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;

  void validate() const;
  /// Learning rate for a 1-based epoch number.
  [[nodiscard]] double learning_rate(std::size_t epoch) const;
};

/// Reads a training config. An optional "model" object overrides the default
/// architecture; the model's dropout rate follows the training config.
TrainConfig load_train_config(const std::filesystem::path& path, model::PressNetConfig* model_cfg = nullptr);
void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg,
                       const model::PressNetConfig& model_cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<double> step_learning_rates;
  std::vector<EpochRecord> epochs;
  /// Epoch whose weights the model holds on return; 0 without validation data.
  std::size_t best_epoch = 0;
  std::optional<double> best_validation_loss;
};

void save_train_log(const std::filesystem::path& path, const TrainResult& result);

/// Minimizes the mean squared error between the masked network output and
/// the normalized target maps with Adam. Batches are reshuffled every epoch
/// from `cfg.seed` and the last partial batch is dropped. With validation
/// data the weights of the epoch with the lowest validation loss (eval mode)
/// are restored before returning. A non-finite loss aborts with a
/// NumericalError naming the epoch, batch and learning rate.
template <typename T>
TrainResult train_model(model::PressNet<T>& net, const TensorData& train, const TensorData* validation,
                        const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Eval-mode mean squared error over `data`.
template <typename T>
double evaluate_loss(model::PressNet<T>& net, const TensorData& data, std::size_t batch_size = 64);

/// Eval-mode network outputs, [count, 60, 21, 2] flattened.
template <typename T>
std::vector<double> predict(model::PressNet<T>& net, std::span<const double> inputs, std::size_t count,
                            std::size_t batch_size = 64);

}  // namespace p2p::harness
