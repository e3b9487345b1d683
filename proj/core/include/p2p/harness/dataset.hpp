#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "p2p/harness/manifest.hpp"
#include "p2p/harness/splits.hpp"
#include "p2p/knn/knn.hpp"
#include "p2p/pose/pose.hpp"
#include "p2p/pressure/pressure.hpp"

namespace p2p::harness {

/// One synchronized pose/pressure pair, hip-centered and cleaned.
struct Frame {
  knn::FrameRef ref;
  std::size_t subject = 0;
  double weight_kg = 0.0;
  pose::PoseFrame centered;
  pressure::PressureGrid grid;
};

struct LoadStats {
  std::size_t pose_rows = 0;
  std::size_t pressure_rows = 0;
  std::size_t matched = 0;
  std::size_t skipped_no_hip = 0;
};

/// Loads the listed takes and joins pose and pressure rows on frame_id.
/// Frames whose MidHip is undetected are skipped and counted.
std::vector<Frame> load_takes(const Manifest& manifest, std::span<const TakeRef> takes,
                              LoadStats* stats = nullptr);

/// Everything fit on a split's training frames and reused at test time.
struct SplitNormalization {
  std::string split_id;
  std::size_t frame_count = 0;
  pose::PoseNormStats pose;
  double pressure_global_max = 0.0;
};

SplitNormalization fit_normalization(std::span<const Frame> train, const std::string& split_id);
void save_normalization(const std::filesystem::path& path, const SplitNormalization& norm);
SplitNormalization load_normalization(const std::filesystem::path& path);

/// Throws DataError unless `norm` was fit for `split_id`.
void require_split(const SplitNormalization& norm, const std::string& split_id);

pressure::PressureNormConfig pressure_config(const SplitNormalization& norm, double weight_kg);

/// Network-ready arrays: inputs [count, 48], targets [count, 60, 21, 2].
struct TensorData {
  std::size_t count = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
};

TensorData make_tensor_data(std::span<const Frame> frames, const SplitNormalization& norm);

knn::Sample make_sample(const Frame& frame, const SplitNormalization& norm);

/// Footmask of the first training take; the model's output mask.
pressure::FootMask split_footmask(const Manifest& manifest, const SplitSpec& split);

}  // namespace p2p::harness
