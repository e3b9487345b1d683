#include "p2p/knn/knn.hpp"

#include <limits>

#include "p2p/error.hpp"

namespace p2p::knn {

PoseFeatures make_features(const pose::PoseFrame& centered, const pose::PoseNormStats& stats) {
  PoseFeatures f;
  f.values = pose::normalize_pose(centered, stats).values;
  f.confidence = pose::feature_confidences(centered);
  return f;
}

double pose_distance(std::span<const double> a_xy, std::span<const double> a_conf,
                     std::span<const double> b_xy, std::span<const double> b_conf) {
  if (a_conf.size() != b_conf.size() || a_xy.size() != 2 * a_conf.size() || b_xy.size() != a_xy.size()) {
    throw DimensionError("pose_distance: poses must have the same joint count");
  }
  double num = 0.0;
  std::size_t shared = 0;
  for (std::size_t j = 0; j < a_conf.size(); ++j) {
    if (!(a_conf[j] * b_conf[j] > 0.0)) continue;
    const double dx = a_xy[2 * j] - b_xy[2 * j];
    const double dy = a_xy[2 * j + 1] - b_xy[2 * j + 1];
    num += dx * dx + dy * dy;
    ++shared;
  }
  if (shared == 0) return std::numeric_limits<double>::infinity();
  return num / (static_cast<double>(shared) + kDistanceEpsilon);
}

double pose_distance(const PoseFeatures& a, const PoseFeatures& b) {
  return pose_distance(a.values, a.confidence, b.values, b.confidence);
}

PoseIndex build_index(std::span<const Sample> training, std::size_t factor) {
  if (factor == 0) throw ConfigError("knn: subsample factor must be >= 1");
  PoseIndex index;
  index.subsample_factor = factor;
  for (std::size_t i = 0; i < training.size(); i += factor) index.entries.push_back(training[i]);
  return index;
}

std::size_t nearest_entry(const PoseIndex& index, const PoseFeatures& query) {
  if (index.entries.empty()) throw DataError("knn: index is empty");
  std::size_t best = index.entries.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const double d = pose_distance(query, index.entries[i].features);
    if (d == std::numeric_limits<double>::infinity()) continue;
    if (best == index.entries.size() || d < best_d ||
        (d == best_d && index.entries[i].ref.frame_id < index.entries[best].ref.frame_id)) {
      best = i;
      best_d = d;
    }
  }
  if (best == index.entries.size()) throw DataError("knn: query has no comparable joints with any entry");
  return best;
}

const pressure::NormalizedPressure& knn_predict(const PoseIndex& index, const PoseFeatures& query) {
  return index.entries[nearest_entry(index, query)].target;
}

}  // namespace p2p::knn
