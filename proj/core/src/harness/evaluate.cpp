#include "p2p/harness/evaluate.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "p2p/csv.hpp"
#include "p2p/error.hpp"
#include "p2p/harness/trainer.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Denormalizes `values` (file order) on the mask of `gt`, clipped to the
// sensor range like the ground truth.
pressure::PressureGrid to_kpa(const std::vector<double>& values, const Frame& gt, const SplitNormalization& norm) {
  pressure::NormalizedPressure n;
  n.frame_id = gt.grid.frame_id;
  n.mask = gt.grid.mask;
  for (std::size_t i = 0; i < pressure::kCells; ++i) {
    if (n.mask.valid[i]) n.values[i] = values[i];
  }
  const auto cfg = pressure_config(norm, gt.weight_kg);
  auto grid = pressure::denormalize_pressure(n, cfg);
  for (auto& v : grid.kpa) v = std::min(v, cfg.clip_kpa);
  return grid;
}

json summary_json(const metrics::ErrorSummary& s) {
  return {{"mean", s.mean}, {"std", s.std},       {"median", s.median},
          {"max", s.max},   {"min", s.min},       {"count", s.count}};
}

json optional_summary(const std::optional<metrics::ErrorSummary>& s) {
  return s ? summary_json(*s) : json(nullptr);
}

const MethodReport* find_method(const std::vector<MethodReport>& methods, const std::string& name) {
  for (const auto& m : methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

}  // namespace

template <typename T>
std::vector<pressure::PressureGrid> pressnet_predictions(model::PressNet<T>& net, std::span<const Frame> frames,
                                                         const SplitNormalization& norm) {
  std::vector<double> inputs;
  inputs.reserve(frames.size() * pose::kFeatureCount);
  for (const auto& f : frames) {
    const auto x = pose::normalize_pose(f.centered, norm.pose);
    inputs.insert(inputs.end(), x.values.begin(), x.values.end());
  }
  const auto out = predict(net, inputs, frames.size());
  std::vector<pressure::PressureGrid> grids;
  grids.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::span<const double> sample(out.data() + i * pressure::kCells, pressure::kCells);
    grids.push_back(to_kpa(pressure::from_channels_last(sample), frames[i], norm));
  }
  return grids;
}

std::vector<pressure::PressureGrid> knn_predictions(const knn::PoseIndex& index, std::span<const Frame> frames,
                                                    const SplitNormalization& norm) {
  std::vector<pressure::PressureGrid> grids;
  grids.reserve(frames.size());
  for (const auto& f : frames) {
    const auto& neighbour = knn::knn_predict(index, knn::make_features(f.centered, norm.pose));
    grids.push_back(to_kpa(neighbour.values, f, norm));
  }
  return grids;
}

MethodReport score_method(const std::string& method, std::span<const Frame> frames,
                          std::span<const pressure::PressureGrid> predictions) {
  if (frames.size() != predictions.size()) {
    throw DimensionError("score_method: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(frames.size()) + " frames");
  }
  MethodReport report;
  report.method = method;
  std::vector<double> mae, left, right;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    FrameResult r;
    r.ref = frames[i].ref;
    r.mae_kpa = metrics::mean_absolute_error_kpa(frames[i].grid, predictions[i]);
    const auto gt = metrics::center_of_pressure(frames[i].grid);
    const auto pred = metrics::center_of_pressure(predictions[i]);
    r.cop_left_mm = metrics::cop_error_l2(gt.left, pred.left);
    r.cop_right_mm = metrics::cop_error_l2(gt.right, pred.right);
    mae.push_back(r.mae_kpa);
    if (r.cop_left_mm) {
      left.push_back(*r.cop_left_mm);
    } else {
      ++report.cop_left_undefined;
    }
    if (r.cop_right_mm) {
      right.push_back(*r.cop_right_mm);
    } else {
      ++report.cop_right_undefined;
    }
    report.frames.push_back(std::move(r));
  }
  report.mae_kpa = metrics::summarize_errors(mae);
  if (!left.empty()) report.cop_left_mm = metrics::summarize_errors(left);
  if (!right.empty()) report.cop_right_mm = metrics::summarize_errors(right);
  return report;
}

EvalReport make_report(const SplitSpec& split, std::size_t skipped_no_hip, std::vector<MethodReport> methods) {
  EvalReport report;
  report.split_id = split_id(split);
  report.test_subject = split.test_subject;
  report.skipped_no_hip = skipped_no_hip;
  report.test_frames = methods.empty() ? 0 : methods.front().frames.size();
  report.methods = std::move(methods);
  const auto* net = find_method(report.methods, "pressnet");
  const auto* knn = find_method(report.methods, "knn");
  if (net && knn) {
    std::vector<double> a, b;
    for (const auto& f : net->frames) a.push_back(f.mae_kpa);
    for (const auto& f : knn->frames) b.push_back(f.mae_kpa);
    try {
      report.ttest = metrics::paired_t_test(a, b);
    } catch (const NumericalError& e) {
      report.ttest_note = e.what();
    }
  } else {
    report.ttest_note = "paired t-test needs both pressnet and knn results";
  }
  return report;
}

std::string report_json(const EvalReport& report) {
  json methods = json::array();
  for (const auto& m : report.methods) {
    methods.push_back({{"method", m.method},
                       {"frames", m.frames.size()},
                       {"mae_kpa", summary_json(m.mae_kpa)},
                       {"cop_left_mm", optional_summary(m.cop_left_mm)},
                       {"cop_right_mm", optional_summary(m.cop_right_mm)},
                       {"cop_left_undefined", m.cop_left_undefined},
                       {"cop_right_undefined", m.cop_right_undefined}});
  }
  json j{{"split_id", report.split_id},
         {"test_subject", report.test_subject},
         {"test_frames", report.test_frames},
         {"skipped_no_hip", report.skipped_no_hip},
         {"methods", methods}};
  if (report.ttest) {
    j["ttest"] = {{"a", "pressnet"},
                  {"b", "knn"},
                  {"t", report.ttest->t},
                  {"p", report.ttest->p},
                  {"df", report.ttest->df},
                  {"significant_at_0_05", report.ttest->p < 0.05}};
  } else {
    j["ttest"] = nullptr;
  }
  if (!report.ttest_note.empty()) j["ttest_note"] = report.ttest_note;
  return j.dump(2);
}

void save_report(const fs::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_json(report) << '\n';
}

void save_frame_errors(const fs::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "method,subject,session,take,frame_id,mae_kpa,cop_left_mm,cop_right_mm\n";
  const auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string("nan"); };
  for (const auto& m : report.methods) {
    for (const auto& f : m.frames) {
      out << m.method << ',' << f.ref.subject << ',' << f.ref.session << ',' << f.ref.take << ',' << f.ref.frame_id
          << ',' << csv::format_double(f.mae_kpa) << ',' << opt(f.cop_left_mm) << ',' << opt(f.cop_right_mm)
          << '\n';
    }
  }
}

std::vector<knn::Sample> training_samples(const Manifest& manifest, const SplitSpec& split,
                                          const SplitNormalization& norm) {
  const auto frames = load_takes(manifest, split.train);
  std::vector<knn::Sample> samples;
  samples.reserve(frames.size());
  for (const auto& f : frames) samples.push_back(make_sample(f, norm));
  return samples;
}

void save_knn_index(const fs::path& path, const SplitSpec& split, const SplitNormalization& norm,
                    const knn::PoseIndex& index) {
  json entries = json::array();
  for (const auto& e : index.entries) {
    entries.push_back({e.ref.subject, e.ref.session, e.ref.take, e.ref.frame_id});
  }
  json j{{"split_id", split_id(split)},
         {"split_subject", split.test_subject},
         {"subsample_factor", index.subsample_factor},
         {"normalization",
          {{"split_id", norm.split_id},
           {"frame_count", norm.frame_count},
           {"pose_mean", norm.pose.mean},
           {"pose_std", norm.pose.std},
           {"pressure_global_max", norm.pressure_global_max}}},
         {"entries", entries}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

StoredKnnIndex load_knn_index(const fs::path& path, const Manifest& manifest, const SplitSpec& split) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  StoredKnnIndex stored;
  std::size_t factor = 0;
  json entries;
  try {
    const json j = json::parse(in);
    const auto id = j.at("split_id").get<std::string>();
    if (id != split_id(split)) {
      throw DataError(path.string() + ": index was built for split '" + id + "' but split '" + split_id(split) +
                      "' was requested");
    }
    factor = j.at("subsample_factor").get<std::size_t>();
    const json& n = j.at("normalization");
    stored.norm.split_id = n.at("split_id").get<std::string>();
    stored.norm.frame_count = n.at("frame_count").get<std::size_t>();
    const auto mean = n.at("pose_mean").get<std::vector<double>>();
    const auto sd = n.at("pose_std").get<std::vector<double>>();
    if (mean.size() != pose::kFeatureCount || sd.size() != pose::kFeatureCount) {
      throw DataError(path.string() + ": pose_mean/pose_std must have 48 entries");
    }
    std::copy(mean.begin(), mean.end(), stored.norm.pose.mean.begin());
    std::copy(sd.begin(), sd.end(), stored.norm.pose.std.begin());
    stored.norm.pose.split_id = stored.norm.split_id;
    stored.norm.pose.frame_count = stored.norm.frame_count;
    stored.norm.pressure_global_max = n.at("pressure_global_max").get<double>();
    entries = j.at("entries");
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  require_split(stored.norm, split_id(split));
  const auto samples = training_samples(manifest, split, stored.norm);
  if (samples.size() != stored.norm.frame_count) {
    throw DataError(path.string() + ": normalization was fit on " + std::to_string(stored.norm.frame_count) +
                    " frames but the split now has " + std::to_string(samples.size()) + " training frames");
  }
  stored.index = knn::build_index(samples, factor);
  if (entries.size() != stored.index.entries.size()) {
    throw DataError(path.string() + ": recorded " + std::to_string(entries.size()) + " entries, rebuilt " +
                    std::to_string(stored.index.entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& r = stored.index.entries[i].ref;
    const auto& e = entries[i];
    if (e.at(0) != r.subject || e.at(1) != r.session || e.at(2) != r.take || e.at(3) != r.frame_id) {
      throw DataError(path.string() + ": entry " + std::to_string(i) + " no longer matches the manifest");
    }
  }
  return stored;
}

template std::vector<pressure::PressureGrid> pressnet_predictions<float>(model::PressNet<float>&,
                                                                         std::span<const Frame>,
                                                                         const SplitNormalization&);
template std::vector<pressure::PressureGrid> pressnet_predictions<double>(model::PressNet<double>&,
                                                                          std::span<const Frame>,
                                                                          const SplitNormalization&);

}  // namespace p2p::harness
