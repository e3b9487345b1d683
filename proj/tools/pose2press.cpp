// pose2press: synthetic data, training, KNN baseline, evaluation and plots.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "p2p/autodiff/checkpoint.hpp"
#include "p2p/csv.hpp"
#include "p2p/error.hpp"
#include "p2p/harness/dataset.hpp"
#include "p2p/harness/evaluate.hpp"
#include "p2p/harness/manifest.hpp"
#include "p2p/harness/render.hpp"
#include "p2p/harness/splits.hpp"
#include "p2p/harness/synth.hpp"
#include "p2p/harness/trainer.hpp"
#include "p2p/metrics/metrics.hpp"
#include "p2p/model/pressnet.hpp"
#include "p2p/runtime.hpp"

namespace fs = std::filesystem;
namespace h = p2p::harness;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

void log(const std::string& msg) { std::cerr << "pose2press: " << msg << '\n'; }

void log_load(const std::string& what, const h::LoadStats& s) {
  log(what + ": " + std::to_string(s.matched) + " frames (" + std::to_string(s.pose_rows) + " pose rows, " +
      std::to_string(s.pressure_rows) + " pressure rows, " + std::to_string(s.skipped_no_hip) +
      " skipped without MidHip)");
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  h::SyntheticSpec spec = a.spec.empty() ? h::SyntheticSpec{} : h::load_synthetic_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  const auto manifest = h::synth_generate(spec, a.out);
  h::save_synthetic_spec(fs::path(a.out) / "synth_spec.json", spec);
  log("wrote " + std::to_string(manifest.subjects.size()) + " subjects to " + a.out);
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string subject;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

template <typename T>
h::TrainResult train_and_save(const h::TrainConfig& cfg, const p2p::model::PressNetConfig& model_cfg,
                              const p2p::pressure::FootMask& mask, const h::TensorData& train,
                              const h::TensorData& val, const fs::path& out) {
  auto net = p2p::model::build_pressnet<T>(model_cfg, mask, cfg.seed);
  log("model has " + std::to_string(net.parameter_count()) + " parameters");
  const auto result = h::train_model(net, train, val.count ? &val : nullptr, cfg, [](const h::EpochRecord& e) {
    std::string line = "epoch " + std::to_string(e.epoch) + " lr " + p2p::csv::format_double(e.learning_rate) +
                       " train_mse " + p2p::csv::format_double(e.train_loss);
    if (e.validation_loss) line += " val_mse " + p2p::csv::format_double(*e.validation_loss);
    log(line);
  });
  p2p::ad::write_checkpoint(out / "model.p2p", net.to_checkpoint());
  return result;
}

int run_train(const TrainArgs& a) {
  const auto manifest = h::load_manifest(a.manifest);
  const auto split = h::loso_split(manifest, a.subject);
  p2p::model::PressNetConfig model_cfg;
  auto cfg = a.config.empty() ? h::TrainConfig{} : h::load_train_config(a.config, &model_cfg);
  if (a.seed) cfg.seed = *a.seed;
  model_cfg.dropout_rate = cfg.dropout_rate;

  h::LoadStats train_stats, val_stats;
  const auto train_frames = h::load_takes(manifest, split.train, &train_stats);
  const auto val_frames = h::load_takes(manifest, split.validation, &val_stats);
  log_load("train", train_stats);
  log_load("validation", val_stats);
  const auto norm = h::fit_normalization(train_frames, h::split_id(split));
  const auto train = h::make_tensor_data(train_frames, norm);
  const auto val = h::make_tensor_data(val_frames, norm);
  const auto mask = h::split_footmask(manifest, split);

  const fs::path out(a.out);
  fs::create_directories(out);
  const auto result = cfg.precision == h::Precision::float64
                          ? train_and_save<double>(cfg, model_cfg, mask, train, val, out)
                          : train_and_save<float>(cfg, model_cfg, mask, train, val, out);
  p2p::model::save_config(out / "model.json", model_cfg);
  h::save_normalization(out / "normalization.json", norm);
  p2p::pressure::save_mask_file(out / "footmask.csv", mask);
  h::save_train_config(out / "train_config.json", cfg, model_cfg);
  h::save_train_log(out / "train_log.json", result);
  if (result.best_epoch) log("kept epoch " + std::to_string(result.best_epoch));
  return kOk;
}

// ---- knn-build ------------------------------------------------------------

struct KnnArgs {
  std::string manifest;
  std::string subject;
  std::size_t factor = p2p::knn::kDefaultSubsampleFactor;
  std::string out;
};

int run_knn_build(const KnnArgs& a) {
  const auto manifest = h::load_manifest(a.manifest);
  const auto split = h::loso_split(manifest, a.subject);
  h::LoadStats stats;
  const auto frames = h::load_takes(manifest, split.train, &stats);
  log_load("train", stats);
  const auto norm = h::fit_normalization(frames, h::split_id(split));
  std::vector<p2p::knn::Sample> samples;
  samples.reserve(frames.size());
  for (const auto& f : frames) samples.push_back(h::make_sample(f, norm));
  const auto index = p2p::knn::build_index(samples, a.factor);
  h::save_knn_index(a.out, split, norm, index);
  log("index holds " + std::to_string(index.entries.size()) + " entries");
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string subject;
  std::string checkpoint;
  std::string knn_index;
  std::string report;
  std::string frames_csv;
};

template <typename T>
std::vector<p2p::pressure::PressureGrid> checkpoint_predictions(const fs::path& dir,
                                                                std::span<const h::Frame> frames,
                                                                const h::SplitNormalization& norm) {
  const auto model_cfg = p2p::model::load_config(dir / "model.json");
  const auto mask = p2p::pressure::load_mask_file(dir / "footmask.csv");
  auto net = p2p::model::build_pressnet<T>(model_cfg, mask, 0);
  net.load_checkpoint(p2p::ad::read_checkpoint(dir / "model.p2p"));
  return h::pressnet_predictions(net, frames, norm);
}

int run_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() && a.knn_index.empty()) {
    throw p2p::ConfigError("eval needs --checkpoint, --knn-index or both");
  }
  const auto manifest = h::load_manifest(a.manifest);
  const auto split = h::loso_split(manifest, a.subject);
  h::LoadStats stats;
  const auto frames = h::load_takes(manifest, split.test, &stats);
  log_load("test", stats);
  if (frames.empty()) throw p2p::DataError("split '" + h::split_id(split) + "' has no usable test frames");

  std::vector<h::MethodReport> methods;
  if (!a.checkpoint.empty()) {
    const fs::path dir(a.checkpoint);
    const auto norm = h::load_normalization(dir / "normalization.json");
    h::require_split(norm, h::split_id(split));
    h::Precision precision = h::Precision::float32;
    if (fs::exists(dir / "train_config.json")) precision = h::load_train_config(dir / "train_config.json").precision;
    const auto preds = precision == h::Precision::float64 ? checkpoint_predictions<double>(dir, frames, norm)
                                                          : checkpoint_predictions<float>(dir, frames, norm);
    methods.push_back(h::score_method("pressnet", frames, preds));
  }
  if (!a.knn_index.empty()) {
    const auto stored = h::load_knn_index(a.knn_index, manifest, split);
    methods.push_back(h::score_method("knn", frames, h::knn_predictions(stored.index, frames, stored.norm)));
  }
  const auto report = h::make_report(split, stats.skipped_no_hip, std::move(methods));
  h::save_report(a.report, report);
  if (!a.frames_csv.empty()) h::save_frame_errors(a.frames_csv, report);
  for (const auto& m : report.methods) {
    log(m.method + ": MAE " + p2p::csv::format_double(m.mae_kpa.mean) + " kPa over " +
        std::to_string(m.mae_kpa.count) + " frames");
  }
  if (report.ttest) {
    log("paired t-test pressnet vs knn: t " + p2p::csv::format_double(report.ttest->t) + " p " +
        p2p::csv::format_double(report.ttest->p) + " df " + std::to_string(report.ttest->df));
  }
  return kOk;
}

// ---- cop ------------------------------------------------------------------

struct CopArgs {
  std::string pressure;
  std::string mask;
  std::string out;
};

int run_cop(const CopArgs& a) {
  const auto raw = p2p::pressure::load_pressure_file(a.pressure);
  std::optional<p2p::pressure::FootMask> mask;
  if (!a.mask.empty()) mask = p2p::pressure::load_mask_file(a.mask);
  std::ofstream out(a.out);
  if (!out) throw p2p::DataError("cannot write " + a.out);
  out << "frame_id,left_x_mm,left_y_mm,right_x_mm,right_y_mm\n";
  const auto fmt = [](const p2p::metrics::CopPoint& p, double v) {
    return p.defined ? p2p::csv::format_double(v) : std::string("NaN");
  };
  std::size_t undefined = 0;
  for (const auto& r : raw) {
    const auto grid = mask ? p2p::pressure::clean_and_mask(r, *mask) : p2p::pressure::clean_and_mask(r);
    const auto cop = p2p::metrics::center_of_pressure(grid);
    undefined += !cop.left.defined + !cop.right.defined;
    out << r.frame_id << ',' << fmt(cop.left, cop.left.x_mm) << ',' << fmt(cop.left, cop.left.y_mm) << ','
        << fmt(cop.right, cop.right.x_mm) << ',' << fmt(cop.right, cop.right.y_mm) << '\n';
  }
  log(std::to_string(raw.size()) + " frames, " + std::to_string(undefined) + " undefined per-foot CoPs");
  return kOk;
}

// ---- plot -----------------------------------------------------------------

struct PlotArgs {
  long long frame = 0;
  std::string gt;
  std::string pred;
  std::string mask;
  std::string out;
};

p2p::pressure::PressureGrid frame_grid(const std::string& path, long long frame,
                                       const std::optional<p2p::pressure::FootMask>& mask) {
  for (const auto& r : p2p::pressure::load_pressure_file(path)) {
    if (r.frame_id == frame) return mask ? p2p::pressure::clean_and_mask(r, *mask) : p2p::pressure::clean_and_mask(r);
  }
  throw p2p::DataError(path + ": no frame " + std::to_string(frame));
}

int run_plot(const PlotArgs& a) {
  std::optional<p2p::pressure::FootMask> mask;
  if (!a.mask.empty()) mask = p2p::pressure::load_mask_file(a.mask);
  const auto gt = frame_grid(a.gt, a.frame, mask);
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / ("frame_" + std::to_string(a.frame) + ".ppm");
  if (a.pred.empty()) {
    const std::vector<h::Panel> panels{{"ground_truth", gt}};
    h::render_panels(path, panels);
  } else {
    h::render_comparison(path, gt, frame_grid(a.pred, a.frame, mask));
  }
  log("wrote " + path.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  p2p::configure_allocator();
  CLI::App app{"Foot pressure regression from 2D body pose"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--spec", synth.spec, "Synthetic dataset spec (JSON)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed (default: the --spec file's, 42)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the network on one leave-one-subject-out split");
  train_cmd->add_option("--manifest", train.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--split-subject", train.subject, "Held-out test subject")->required();
  train_cmd->add_option("--config", train.config, "Training config (JSON)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Checkpoint directory")->required();
  train_cmd->add_option("--seed", train.seed, "Random seed (default: the config's, 42)");

  KnnArgs knn;
  auto* knn_cmd = app.add_subcommand("knn-build", "Build the nearest-neighbour index of a split");
  knn_cmd->add_option("--manifest", knn.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  knn_cmd->add_option("--split-subject", knn.subject, "Held-out test subject")->required();
  knn_cmd->add_option("--factor", knn.factor, "Keep every n-th training frame")->capture_default_str();
  knn_cmd->add_option("--out", knn.out, "Index file")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and/or a KNN index on the test subject");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split-subject", eval.subject, "Held-out test subject")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory")->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--knn-index", eval.knn_index, "KNN index file")->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval.report, "Report JSON")->required();
  eval_cmd->add_option("--frames-csv", eval.frames_csv, "Per-frame errors CSV");

  CopArgs cop;
  auto* cop_cmd = app.add_subcommand("cop", "Per-foot centre of pressure of every frame");
  cop_cmd->add_option("--pressure", cop.pressure, "Pressure CSV")->required()->check(CLI::ExistingFile);
  cop_cmd->add_option("--mask", cop.mask, "Mask CSV")->check(CLI::ExistingFile);
  cop_cmd->add_option("--out", cop.out, "Output CSV")->required();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render ground truth, prediction and error heatmaps");
  plot_cmd->add_option("--frame", plot.frame, "frame_id to render")->required();
  plot_cmd->add_option("--gt", plot.gt, "Ground-truth pressure CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--pred", plot.pred, "Predicted pressure CSV")->check(CLI::ExistingFile);
  plot_cmd->add_option("--mask", plot.mask, "Mask CSV")->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*knn_cmd) return run_knn_build(knn);
    if (*eval_cmd) return run_eval(eval);
    if (*cop_cmd) return run_cop(cop);
    if (*plot_cmd) return run_plot(plot);
  } catch (const p2p::ConfigError& e) {
    log(std::string("configuration error: ") + e.what());
    return kUsage;
  } catch (const p2p::NumericalError& e) {
    log(std::string("numerical failure: ") + e.what());
    return kNumerical;
  } catch (const p2p::Error& e) {
    log(std::string("data error: ") + e.what());
    return kData;
  } catch (const std::exception& e) {
    log(std::string("data error: ") + e.what());
    return kData;
  }
  return kUsage;
}
