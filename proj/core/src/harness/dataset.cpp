#include "p2p/harness/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"
#include "p2p/error.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Frame> load_takes(const Manifest& manifest, std::span<const TakeRef> takes, LoadStats* stats) {
  LoadStats local;
  std::vector<Frame> frames;
  for (const auto& ref : takes) {
    const Subject& subject = manifest.subjects.at(ref.subject);
    const Take& take = subject.takes.at(ref.take);
    const auto poses = pose::load_pose_file(take.pose_file);
    const auto raw = pressure::load_pressure_file(take.pressure_file);
    const auto mask = pressure::load_mask_file(take.mask_file);
    local.pose_rows += poses.size();
    local.pressure_rows += raw.size();

    std::map<std::int64_t, const pressure::RawPressureFrame*> by_id;
    for (const auto& r : raw) by_id.emplace(r.frame_id, &r);
    for (const auto& p : poses) {
      const auto it = by_id.find(p.frame_id);
      if (it == by_id.end()) continue;
      if (!p.joints[pose::kMidHip].detected()) {
        ++local.skipped_no_hip;
        continue;
      }
      Frame f;
      f.ref = {subject.id, take.session, take.id, p.frame_id};
      f.subject = ref.subject;
      f.weight_kg = subject.weight_kg;
      f.centered = pose::center_on_hip(p);
      f.grid = pressure::clean_and_mask(*it->second, mask);
      frames.push_back(std::move(f));
      ++local.matched;
    }
  }
  if (stats) *stats = local;
  return frames;
}

SplitNormalization fit_normalization(std::span<const Frame> train, const std::string& split_id) {
  if (train.empty()) throw DataError("cannot fit normalization on an empty training set");
  std::vector<pose::PoseFrame> centered;
  centered.reserve(train.size());
  double global_max = 0.0;
  for (const auto& f : train) {
    centered.push_back(f.centered);
    global_max = std::max(global_max, pressure::weight_normalized_max(f.grid, f.weight_kg));
  }
  if (!(global_max > 0.0)) throw NumericalError("training pressure is zero everywhere; cannot normalize");
  SplitNormalization norm;
  norm.split_id = split_id;
  norm.frame_count = train.size();
  norm.pose = pose::fit_norm_stats(centered, split_id);
  norm.pressure_global_max = global_max;
  return norm;
}

void save_normalization(const fs::path& path, const SplitNormalization& norm) {
  json j;
  j["split_id"] = norm.split_id;
  j["frame_count"] = norm.frame_count;
  j["pose_mean"] = norm.pose.mean;
  j["pose_std"] = norm.pose.std;
  j["pressure_global_max"] = norm.pressure_global_max;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SplitNormalization load_normalization(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    const json j = json::parse(in);
    SplitNormalization norm;
    norm.split_id = j.at("split_id").get<std::string>();
    norm.frame_count = j.at("frame_count").get<std::size_t>();
    const auto mean = j.at("pose_mean").get<std::vector<double>>();
    const auto sd = j.at("pose_std").get<std::vector<double>>();
    if (mean.size() != pose::kFeatureCount || sd.size() != pose::kFeatureCount) {
      throw DataError(path.string() + ": pose_mean/pose_std must have 48 entries");
    }
    std::copy(mean.begin(), mean.end(), norm.pose.mean.begin());
    std::copy(sd.begin(), sd.end(), norm.pose.std.begin());
    norm.pose.split_id = norm.split_id;
    norm.pose.frame_count = norm.frame_count;
    norm.pressure_global_max = j.at("pressure_global_max").get<double>();
    if (!(norm.pressure_global_max > 0.0)) throw DataError(path.string() + ": pressure_global_max must be positive");
    return norm;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void require_split(const SplitNormalization& norm, const std::string& split_id) {
  if (norm.split_id != split_id) {
    throw DataError("normalization statistics were fit for split '" + norm.split_id +
                    "' but split '" + split_id + "' was requested");
  }
}

pressure::PressureNormConfig pressure_config(const SplitNormalization& norm, double weight_kg) {
  pressure::PressureNormConfig cfg;
  cfg.subject_weight_kg = weight_kg;
  cfg.global_max = norm.pressure_global_max;
  return cfg;
}

TensorData make_tensor_data(std::span<const Frame> frames, const SplitNormalization& norm) {
  TensorData data;
  data.count = frames.size();
  data.inputs.reserve(frames.size() * pose::kFeatureCount);
  data.targets.reserve(frames.size() * pressure::kCells);
  for (const auto& f : frames) {
    const auto x = pose::normalize_pose(f.centered, norm.pose);
    data.inputs.insert(data.inputs.end(), x.values.begin(), x.values.end());
    const auto y = pressure::normalize_pressure(f.grid, pressure_config(norm, f.weight_kg));
    const auto cl = pressure::to_channels_last<double>(y.values);
    data.targets.insert(data.targets.end(), cl.begin(), cl.end());
  }
  return data;
}

knn::Sample make_sample(const Frame& frame, const SplitNormalization& norm) {
  knn::Sample s;
  s.ref = frame.ref;
  s.features = knn::make_features(frame.centered, norm.pose);
  s.target = pressure::normalize_pressure(frame.grid, pressure_config(norm, frame.weight_kg));
  return s;
}

pressure::FootMask split_footmask(const Manifest& manifest, const SplitSpec& split) {
  if (split.train.empty()) throw DataError("split '" + split.test_subject + "' has no training takes");
  const auto& ref = split.train.front();
  return pressure::load_mask_file(manifest.subjects.at(ref.subject).takes.at(ref.take).mask_file);
}

}  // namespace p2p::harness
