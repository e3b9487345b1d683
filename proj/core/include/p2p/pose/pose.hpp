#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace p2p::pose {

/// OpenPose Body25 keypoint order.
enum class Joint : std::size_t {
  Nose = 0, Neck, RShoulder, RElbow, RWrist, LShoulder, LElbow, LWrist,
  MidHip, RHip, RKnee, RAnkle, LHip, LKnee, LAnkle,
  REye, LEye, REar, LEar, LBigToe, LSmallToe, LHeel, RBigToe, RSmallToe, RHeel,
};

inline constexpr std::size_t kJointCount = 25;
inline constexpr std::size_t kMidHip = static_cast<std::size_t>(Joint::MidHip);
/// Joints fed to the regressors: every Body25 joint except MidHip.
inline constexpr std::size_t kFeatureJoints = kJointCount - 1;
/// Network input width: x, y for each feature joint.
inline constexpr std::size_t kFeatureCount = 2 * kFeatureJoints;

std::string_view joint_name(std::size_t body25_index);

/// Body25 index of the i-th feature joint (skips MidHip).
constexpr std::size_t feature_joint(std::size_t i) { return i < kMidHip ? i : i + 1; }

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  /// 0 means the detector did not find the joint.
  double confidence = 0.0;

  [[nodiscard]] bool detected() const { return confidence > 0.0; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct PoseFrame {
  std::int64_t frame_id = 0;
  std::array<Keypoint, kJointCount> joints{};

  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

/// Per-coordinate statistics in feature order x0, y0, x1, y1, ...
struct PoseNormStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> std{};
  std::string split_id;
  std::size_t frame_count = 0;
};

struct NormalizedPose {
  std::array<double, kFeatureCount> values{};
};

/// Reads the pose CSV (header `frame_id,j0_x,j0_y,j0_c,...,j24_c`).
/// Frames come back sorted by frame_id. Throws DataError naming the line on
/// a wrong column count, a non-finite number, a confidence outside [0, 1] or
/// a duplicate frame id.
std::vector<PoseFrame> load_pose_file(const std::filesystem::path& path);
void save_pose_file(const std::filesystem::path& path, std::span<const PoseFrame> frames);
std::string pose_csv_header();

/// Translates detected joints so MidHip sits at the origin. Undetected
/// joints are left as they are. Throws DataError if MidHip is undetected.
PoseFrame center_on_hip(const PoseFrame& frame);

/// Mean and population standard deviation of every feature coordinate over
/// hip-centred frames, skipping undetected joints. Throws NumericalError when a
/// coordinate has fewer than two detections or zero spread.
PoseNormStats fit_norm_stats(std::span<const PoseFrame> centered, std::string split_id = {});

/// (value - mean) / std per coordinate of a hip-centred frame. Undetected
/// joints map to 0, the training mean.
NormalizedPose normalize_pose(const PoseFrame& centered, const PoseNormStats& stats);

/// Detection confidence of each feature joint, in feature order.
std::array<double, kFeatureJoints> feature_confidences(const PoseFrame& frame);

void save_norm_stats(const std::filesystem::path& path, const PoseNormStats& stats);
PoseNormStats load_norm_stats(const std::filesystem::path& path);

}  // namespace p2p::pose
