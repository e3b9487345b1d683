#include "p2p/pressure/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "p2p/csv.hpp"
#include "p2p/error.hpp"

namespace p2p::pressure {

namespace {

constexpr std::size_t kColumns = 1 + kCells;

std::string header() {
  std::string h = "frame_id";
  for (std::size_t i = 0; i < kCells; ++i) h += ",p" + std::to_string(i);
  return h;
}

// Reads rows of frame_id + 2520 numbers; `visit(frame_id, values, where)`.
template <typename Visit>
void read_grid_rows(const std::filesystem::path& path, Visit&& visit) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!csv::read_line(in, line)) throw DataError(path.string() + ": empty file");
  if (csv::split(line).size() != kColumns) {
    throw DataError(path.string() + ":1: header must have " + std::to_string(kColumns) + " columns");
  }
  std::size_t line_no = 1;
  std::vector<double> values(kCells);
  while (csv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = csv::split(line);
    if (fields.size() != kColumns) {
      throw DataError(where + ": expected " + std::to_string(kColumns) + " columns, found " +
                      std::to_string(fields.size()));
    }
    const auto id = csv::parse_int(fields[0], where);
    for (std::size_t i = 0; i < kCells; ++i) values[i] = csv::parse_double(fields[i + 1], where);
    visit(id, values, where);
  }
}

}  // namespace

std::size_t FootMask::count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::size_t FootMask::count(Foot foot) const {
  const auto begin = valid.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(foot) * kCellsPerFoot);
  return static_cast<std::size_t>(std::count(begin, begin + kCellsPerFoot, std::uint8_t{1}));
}

double PressureNormConfig::weight_factor() const {
  if (!(subject_weight_kg > 0.0)) throw ConfigError("pressure normalization: subject weight must be positive");
  return kpa_to_psi * sensor_area_in2 / subject_weight_kg;
}

std::vector<RawPressureFrame> load_pressure_file(const std::filesystem::path& path) {
  std::vector<RawPressureFrame> frames;
  read_grid_rows(path, [&](long long id, const std::vector<double>& values, const std::string& where) {
    for (std::size_t i = 0; i < kCells; ++i) {
      if (std::isinf(values[i])) throw DataError(where + ": infinite value at p" + std::to_string(i));
      if (values[i] < 0.0) throw DataError(where + ": negative pressure at p" + std::to_string(i));
    }
    frames.push_back(RawPressureFrame{id, values});
  });
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  return frames;
}

void save_pressure_file(const std::filesystem::path& path, std::span<const RawPressureFrame> frames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << header() << '\n';
  for (const auto& f : frames) {
    if (f.values.size() != kCells) throw DimensionError("pressure frame must have 2520 values");
    out << f.frame_id;
    for (double v : f.values) out << ',' << csv::format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

FootMask load_mask_file(const std::filesystem::path& path) {
  std::optional<FootMask> mask;
  read_grid_rows(path, [&](long long, const std::vector<double>& values, const std::string& where) {
    FootMask m;
    for (std::size_t i = 0; i < kCells; ++i) {
      if (values[i] != 0.0 && values[i] != 1.0) throw DataError(where + ": mask values must be 0 or 1");
      m.valid[i] = values[i] == 1.0 ? 1 : 0;
    }
    if (mask && !(*mask == m)) throw DataError(where + ": mask rows disagree");
    mask = std::move(m);
  });
  if (!mask) throw DataError(path.string() + ": mask file has no rows");
  return *mask;
}

void save_mask_file(const std::filesystem::path& path, const FootMask& mask) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << header() << "\n0";
  for (auto v : mask.valid) out << ',' << static_cast<int>(v);
  out << '\n';
}

PressureGrid clean_and_mask(const RawPressureFrame& raw) {
  if (raw.values.size() != kCells) throw DimensionError("pressure frame must have 2520 values");
  PressureGrid g;
  g.frame_id = raw.frame_id;
  for (std::size_t i = 0; i < kCells; ++i) {
    const double v = raw.values[i];
    if (std::isnan(v)) continue;
    g.mask.valid[i] = 1;
    g.kpa[i] = std::min(std::max(v, 0.0), 1000.0);
  }
  return g;
}

PressureGrid clean_and_mask(const RawPressureFrame& raw, const FootMask& footmask) {
  PressureGrid g = clean_and_mask(raw);
  for (std::size_t i = 0; i < kCells; ++i) {
    if (!footmask.valid[i]) {
      g.mask.valid[i] = 0;
      g.kpa[i] = 0.0;
    }
  }
  return g;
}

double weight_normalized_max(const PressureGrid& grid, double weight_kg) {
  PressureNormConfig cfg;
  cfg.subject_weight_kg = weight_kg;
  const double factor = cfg.weight_factor();
  double best = 0.0;
  for (std::size_t i = 0; i < kCells; ++i) {
    if (grid.mask.valid[i]) best = std::max(best, std::min(grid.kpa[i], cfg.clip_kpa) * factor);
  }
  return best;
}

NormalizedPressure normalize_pressure(const PressureGrid& grid, const PressureNormConfig& cfg) {
  if (!cfg.global_max) throw ConfigError("pressure normalization: global_max has not been fit");
  if (!(*cfg.global_max > 0.0)) throw ConfigError("pressure normalization: global_max must be positive");
  const double scale = cfg.weight_factor() / *cfg.global_max;
  NormalizedPressure out;
  out.frame_id = grid.frame_id;
  out.mask = grid.mask;
  for (std::size_t i = 0; i < kCells; ++i) {
    if (!grid.mask.valid[i]) continue;
    out.values[i] = std::clamp(std::min(grid.kpa[i], cfg.clip_kpa) * scale, 0.0, 1.0);
  }
  return out;
}

PressureGrid denormalize_pressure(const NormalizedPressure& norm, const PressureNormConfig& cfg) {
  if (!cfg.global_max) throw ConfigError("pressure denormalization: global_max has not been fit");
  const double scale = *cfg.global_max / cfg.weight_factor();
  PressureGrid out;
  out.frame_id = norm.frame_id;
  out.mask = norm.mask;
  for (std::size_t i = 0; i < kCells; ++i) {
    if (norm.mask.valid[i]) out.kpa[i] = norm.values[i] * scale;
  }
  return out;
}

template <typename T>
std::vector<T> to_channels_last(std::span<const double> file_order) {
  if (file_order.size() != kCells) throw DimensionError("expected 2520 pressure values");
  std::vector<T> out(kCells);
  for (std::size_t f = 0; f < kFeet; ++f)
    for (std::size_t r = 0; r < kRows; ++r)
      for (std::size_t c = 0; c < kCols; ++c)
        out[channels_last_index(f, r, c)] = static_cast<T>(file_order[cell_index(f, r, c)]);
  return out;
}

namespace {

template <typename T>
std::vector<double> from_channels_last_impl(std::span<const T> in) {
  if (in.size() != kCells) throw DimensionError("expected 2520 pressure values");
  std::vector<double> out(kCells);
  for (std::size_t f = 0; f < kFeet; ++f)
    for (std::size_t r = 0; r < kRows; ++r)
      for (std::size_t c = 0; c < kCols; ++c) out[cell_index(f, r, c)] = in[channels_last_index(f, r, c)];
  return out;
}

}  // namespace

std::vector<double> from_channels_last(std::span<const float> channels_last) {
  return from_channels_last_impl(channels_last);
}
std::vector<double> from_channels_last(std::span<const double> channels_last) {
  return from_channels_last_impl(channels_last);
}

template std::vector<float> to_channels_last<float>(std::span<const double>);
template std::vector<double> to_channels_last<double>(std::span<const double>);

}  // namespace p2p::pressure
