#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p2p/pose/pose.hpp"
#include "p2p/pressure/pressure.hpp"

// K=1 nearest-neighbour pressure regression over confidence-masked poses.
namespace p2p::knn {

inline constexpr double kDistanceEpsilon = 1e-8;
inline constexpr std::size_t kDefaultSubsampleFactor = 5;

/// Normalized feature coordinates plus the detection confidence of each joint.
struct PoseFeatures {
  std::array<double, pose::kFeatureCount> values{};
  std::array<double, pose::kFeatureJoints> confidence{};
};

PoseFeatures make_features(const pose::PoseFrame& centered, const pose::PoseNormStats& stats);

/// Mean squared joint displacement over joints detected in both poses:
///
///     d = sum_j |a_j - b_j|^2 [c_j^a c_j^b > 0] / (sum_j [c_j^a c_j^b > 0] + eps)
///
/// `xy` holds x, y per joint. Returns +inf when no joint is detected in both,
/// so such pairs never win the nearest-neighbour search.
double pose_distance(std::span<const double> a_xy, std::span<const double> a_conf,
                     std::span<const double> b_xy, std::span<const double> b_conf);
double pose_distance(const PoseFeatures& a, const PoseFeatures& b);

/// Where an indexed frame came from.
struct FrameRef {
  std::string subject;
  std::string session;
  std::string take;
  std::int64_t frame_id = 0;
};

struct Sample {
  FrameRef ref;
  PoseFeatures features;
  pressure::NormalizedPressure target;
};

struct PoseIndex {
  std::vector<Sample> entries;
  std::size_t subsample_factor = kDefaultSubsampleFactor;
};

/// Keeps every `factor`-th sample (positions 0, factor, 2*factor, ...).
PoseIndex build_index(std::span<const Sample> training, std::size_t factor = kDefaultSubsampleFactor);

/// Position of the nearest entry. Ties go to the lower frame_id, then to the
/// earlier entry. Throws DataError for an empty index or when the query shares
/// no detected joint with any entry.
std::size_t nearest_entry(const PoseIndex& index, const PoseFeatures& query);

/// Pressure map of the nearest entry.
const pressure::NormalizedPressure& knn_predict(const PoseIndex& index, const PoseFeatures& query);

}  // namespace p2p::knn
