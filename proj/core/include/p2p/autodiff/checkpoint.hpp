#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "p2p/autodiff/adam.hpp"
#include "p2p/autodiff/tensor.hpp"

namespace p2p::ad {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// Contents of a parameter checkpoint file.
///
/// Layout, all integers little-endian:
///
///     "P2P1"
///     u32 entry_count
///     entry_count x { u32 name_len, name (UTF-8), u32 rank, rank x u32 dim,
///                     product(dims) x f32 }
///     u8  has_optimizer
///     if has_optimizer:
///       u64 step, f64 beta1, f64 beta2, f64 epsilon, f64 learning_rate,
///       u32 moment_count,
///       moment_count x { u64 length, length x f32 m, length x f32 v }
///
/// Entries carry trainable parameters and non-trainable buffers (batch-norm
/// running statistics) alike; moments follow the order of the trainable ones.
struct Checkpoint {
  std::vector<NamedArray> tensors;
  std::optional<AdamState> optimizer;

  [[nodiscard]] const NamedArray* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace p2p::ad
