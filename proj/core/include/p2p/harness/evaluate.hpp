#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p2p/harness/dataset.hpp"
#include "p2p/knn/knn.hpp"
#include "p2p/metrics/metrics.hpp"
#include "p2p/model/pressnet.hpp"

namespace p2p::harness {

/// Per-frame errors of one method on one test frame.
struct FrameResult {
  knn::FrameRef ref;
  double mae_kpa = 0.0;
  std::optional<double> cop_left_mm;
  std::optional<double> cop_right_mm;
};

struct MethodReport {
  std::string method;
  std::vector<FrameResult> frames;
  metrics::ErrorSummary mae_kpa;
  std::optional<metrics::ErrorSummary> cop_left_mm;
  std::optional<metrics::ErrorSummary> cop_right_mm;
  /// Frames excluded from a foot's CoP summary because either CoP is undefined.
  std::size_t cop_left_undefined = 0;
  std::size_t cop_right_undefined = 0;
};

struct EvalReport {
  std::string split_id;
  std::string test_subject;
  std::size_t test_frames = 0;
  std::size_t skipped_no_hip = 0;
  std::vector<MethodReport> methods;
  /// Paired test on per-frame MAE, pressnet minus knn, when both ran.
  std::optional<metrics::TTestResult> ttest;
  std::string ttest_note;
};

/// Denormalized network predictions (kPa, file order) for `frames`, each
/// restricted to its ground-truth mask and scaled by the frame's weight.
template <typename T>
std::vector<pressure::PressureGrid> pressnet_predictions(model::PressNet<T>& net, std::span<const Frame> frames,
                                                         const SplitNormalization& norm);

/// Nearest-neighbour pressure maps, rescaled to each test frame's weight.
std::vector<pressure::PressureGrid> knn_predictions(const knn::PoseIndex& index, std::span<const Frame> frames,
                                                    const SplitNormalization& norm);

/// MAE and per-foot CoP errors of `predictions` against the frames' grids.
MethodReport score_method(const std::string& method, std::span<const Frame> frames,
                          std::span<const pressure::PressureGrid> predictions);

/// Assembles the report and runs the paired t-test when both "pressnet" and
/// "knn" are present. A zero-variance difference series is noted instead.
EvalReport make_report(const SplitSpec& split, std::size_t skipped_no_hip, std::vector<MethodReport> methods);

std::string report_json(const EvalReport& report);
void save_report(const std::filesystem::path& path, const EvalReport& report);
/// One row per (method, frame): method,subject,session,take,frame_id,mae_kpa,cop_left_mm,cop_right_mm.
void save_frame_errors(const std::filesystem::path& path, const EvalReport& report);

/// KNN index file: split id, subsample factor, the normalization it
/// was built with and the reference of every entry. Pressure targets are not
/// stored; `load_knn_index` rebuilds them from the manifest and checks that
/// the entries match.
void save_knn_index(const std::filesystem::path& path, const SplitSpec& split, const SplitNormalization& norm,
                    const knn::PoseIndex& index);

struct StoredKnnIndex {
  SplitNormalization norm;
  knn::PoseIndex index;
};

/// Throws DataError if the file belongs to another split or the manifest no
/// longer produces the recorded entries.
StoredKnnIndex load_knn_index(const std::filesystem::path& path, const Manifest& manifest, const SplitSpec& split);

/// Training samples of `split` under `norm`, in load order.
std::vector<knn::Sample> training_samples(const Manifest& manifest, const SplitSpec& split,
                                          const SplitNormalization& norm);

}  // namespace p2p::harness
