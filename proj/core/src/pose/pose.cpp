#include "p2p/pose/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "p2p/csv.hpp"
#include "p2p/error.hpp"

namespace p2p::pose {

namespace {

constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "Nose",   "Neck",  "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist", "MidHip", "RHip",     "RKnee",  "RAnkle", "LHip",      "LKnee",
    "LAnkle", "REye",  "LEye",      "REar",   "LEar",   "LBigToe",   "LSmallToe",
    "LHeel",  "RBigToe", "RSmallToe", "RHeel"};

constexpr std::size_t kColumns = 1 + 3 * kJointCount;

}  // namespace

std::string_view joint_name(std::size_t body25_index) { return kJointNames.at(body25_index); }

std::string pose_csv_header() {
  std::string h = "frame_id";
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto p = "j" + std::to_string(j);
    h += "," + p + "_x," + p + "_y," + p + "_c";
  }
  return h;
}

std::vector<PoseFrame> load_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pose file " + path.string());

  std::string line;
  if (!csv::read_line(in, line)) throw DataError(path.string() + ": empty pose file");
  if (csv::split(line).size() != kColumns) {
    throw DataError(path.string() + ":1: header must have " + std::to_string(kColumns) + " columns");
  }

  std::vector<PoseFrame> frames;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = csv::split(line);
    if (fields.size() != kColumns) {
      throw DataError(where + ": expected " + std::to_string(kColumns) + " columns, found " +
                      std::to_string(fields.size()));
    }
    PoseFrame f;
    f.frame_id = csv::parse_int(fields[0], where);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      auto& k = f.joints[j];
      k.x = csv::parse_double(fields[1 + 3 * j], where);
      k.y = csv::parse_double(fields[2 + 3 * j], where);
      k.confidence = csv::parse_double(fields[3 + 3 * j], where);
      if (!std::isfinite(k.x) || !std::isfinite(k.y) || !std::isfinite(k.confidence)) {
        throw DataError(where + ": non-finite value for joint " + std::to_string(j));
      }
      if (k.confidence < 0.0 || k.confidence > 1.0) {
        throw DataError(where + ": confidence of joint " + std::to_string(j) + " outside [0,1]");
      }
    }
    frames.push_back(f);
  }

  std::stable_sort(frames.begin(), frames.end(),
                   [](const PoseFrame& a, const PoseFrame& b) { return a.frame_id < b.frame_id; });
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_id == frames[i - 1].frame_id) {
      throw DataError(path.string() + ": duplicate frame_id " + std::to_string(frames[i].frame_id));
    }
  }
  return frames;
}

void save_pose_file(const std::filesystem::path& path, std::span<const PoseFrame> frames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write pose file " + path.string());
  out << pose_csv_header() << '\n';
  for (const auto& f : frames) {
    out << f.frame_id;
    for (const auto& k : f.joints) {
      out << ',' << csv::format_double(k.x) << ',' << csv::format_double(k.y) << ','
          << csv::format_double(k.confidence);
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing pose file " + path.string());
}

PoseFrame center_on_hip(const PoseFrame& frame) {
  const Keypoint hip = frame.joints[kMidHip];
  if (!hip.detected()) {
    throw DataError("frame " + std::to_string(frame.frame_id) + ": MidHip undetected, cannot centre");
  }
  PoseFrame out = frame;
  for (auto& k : out.joints) {
    if (!k.detected()) continue;
    k.x -= hip.x;
    k.y -= hip.y;
  }
  out.joints[kMidHip].x = 0.0;
  out.joints[kMidHip].y = 0.0;
  return out;
}

PoseNormStats fit_norm_stats(std::span<const PoseFrame> centered, std::string split_id) {
  PoseNormStats stats;
  stats.split_id = std::move(split_id);
  stats.frame_count = centered.size();

  for (std::size_t i = 0; i < kFeatureJoints; ++i) {
    const std::size_t j = feature_joint(i);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      const std::size_t f = 2 * i + axis;
      std::size_t n = 0;
      double sum = 0.0;
      for (const auto& frame : centered) {
        const auto& k = frame.joints[j];
        if (!k.detected()) continue;
        sum += axis == 0 ? k.x : k.y;
        ++n;
      }
      if (n < 2) {
        throw NumericalError("pose stats: " + std::string(joint_name(j)) + (axis == 0 ? ".x" : ".y") +
                             " has fewer than two confident observations");
      }
      const double mean = sum / static_cast<double>(n);
      double ss = 0.0;
      for (const auto& frame : centered) {
        const auto& k = frame.joints[j];
        if (!k.detected()) continue;
        const double d = (axis == 0 ? k.x : k.y) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(n));
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw NumericalError("pose stats: " + std::string(joint_name(j)) + (axis == 0 ? ".x" : ".y") +
                             " has zero standard deviation");
      }
      stats.mean[f] = mean;
      stats.std[f] = sd;
    }
  }
  return stats;
}

NormalizedPose normalize_pose(const PoseFrame& centered, const PoseNormStats& stats) {
  NormalizedPose out;
  for (std::size_t i = 0; i < kFeatureJoints; ++i) {
    const auto& k = centered.joints[feature_joint(i)];
    if (!k.detected()) continue;
    out.values[2 * i] = (k.x - stats.mean[2 * i]) / stats.std[2 * i];
    out.values[2 * i + 1] = (k.y - stats.mean[2 * i + 1]) / stats.std[2 * i + 1];
  }
  return out;
}

std::array<double, kFeatureJoints> feature_confidences(const PoseFrame& frame) {
  std::array<double, kFeatureJoints> c{};
  for (std::size_t i = 0; i < kFeatureJoints; ++i) c[i] = frame.joints[feature_joint(i)].confidence;
  return c;
}

void save_norm_stats(const std::filesystem::path& path, const PoseNormStats& stats) {
  nlohmann::json j;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  j["provenance"] = {{"split_id", stats.split_id}, {"frame_count", stats.frame_count}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write stats file " + path.string());
  out << j.dump(2) << '\n';
}

PoseNormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stats file " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    PoseNormStats s;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto sd = j.at("std").get<std::vector<double>>();
    if (mean.size() != kFeatureCount || sd.size() != kFeatureCount) {
      throw DataError(path.string() + ": mean/std must have 48 entries");
    }
    std::copy(mean.begin(), mean.end(), s.mean.begin());
    std::copy(sd.begin(), sd.end(), s.std.begin());
    for (double v : s.std) {
      if (!(v > 0.0)) throw DataError(path.string() + ": non-positive std");
    }
    s.split_id = j.at("provenance").at("split_id").get<std::string>();
    s.frame_count = j.at("provenance").at("frame_count").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace p2p::pose
