#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p2p::pressure {

inline constexpr std::size_t kRows = 60;
inline constexpr std::size_t kCols = 21;
inline constexpr std::size_t kFeet = 2;
inline constexpr std::size_t kCellsPerFoot = kRows * kCols;
inline constexpr std::size_t kCells = kFeet * kCellsPerFoot;

enum class Foot : std::size_t { left = 0, right = 1 };

/// File-order index: foot-major, then row, then column.
constexpr std::size_t cell_index(std::size_t foot, std::size_t row, std::size_t col) {
  return foot * kCellsPerFoot + row * kCols + col;
}

/// Index in the network's [row, col, foot] channels-last layout.
constexpr std::size_t channels_last_index(std::size_t foot, std::size_t row, std::size_t col) {
  return (row * kCols + col) * kFeet + foot;
}

/// One row of a pressure CSV, kPa, NaN where the sensor has no valid cell.
struct RawPressureFrame {
  std::int64_t frame_id = 0;
  std::vector<double> values = std::vector<double>(kCells, 0.0);
};

/// Binary validity map in file order; 1 = prexel inside the insole.
struct FootMask {
  std::vector<std::uint8_t> valid = std::vector<std::uint8_t>(kCells, 0);

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] std::size_t count(Foot foot) const;
  friend bool operator==(const FootMask&, const FootMask&) = default;
};

/// Cleaned grid: no NaN, >= 0 on the mask, exactly 0 off it.
struct PressureGrid {
  std::int64_t frame_id = 0;
  std::vector<double> kpa = std::vector<double>(kCells, 0.0);
  FootMask mask;
};

struct PressureNormConfig {
  double subject_weight_kg = 0.0;
  double kpa_to_psi = 0.145;
  double sensor_area_in2 = 0.039;
  double clip_kpa = 1000.0;
  /// Largest weight-normalized masked value over the training split.
  std::optional<double> global_max;

  /// kPa -> weight-normalized units, before dividing by global_max.
  [[nodiscard]] double weight_factor() const;
};

/// Normalized map in [0, 1]; 0 off the mask.
struct NormalizedPressure {
  std::int64_t frame_id = 0;
  std::vector<double> values = std::vector<double>(kCells, 0.0);
  FootMask mask;
};

/// Reads `frame_id,p0,...,p2519`. NaN cells are preserved. Throws DataError on
/// a wrong column count or a negative finite value.
std::vector<RawPressureFrame> load_pressure_file(const std::filesystem::path& path);
void save_pressure_file(const std::filesystem::path& path, std::span<const RawPressureFrame> frames);

/// Reads a mask CSV (same layout, 0/1). Every row must describe the same mask.
FootMask load_mask_file(const std::filesystem::path& path);
void save_mask_file(const std::filesystem::path& path, const FootMask& mask);

/// NaN -> 0 and off-mask, values above 1000 kPa clipped.
PressureGrid clean_and_mask(const RawPressureFrame& raw);
/// As above, additionally zeroing cells outside `footmask`.
PressureGrid clean_and_mask(const RawPressureFrame& raw, const FootMask& footmask);

/// max over masked cells of min(v, clip) * weight_factor(weight).
double weight_normalized_max(const PressureGrid& grid, double weight_kg);

/// v' = min(v, 1000) * 0.145 * 0.039 / weight / global_max, clamped to [0, 1].
/// Throws ConfigError if global_max is unset or the weight is not positive.
NormalizedPressure normalize_pressure(const PressureGrid& grid, const PressureNormConfig& cfg);

/// Algebraic inverse of normalize_pressure on masked cells.
PressureGrid denormalize_pressure(const NormalizedPressure& norm, const PressureNormConfig& cfg);

/// Reorders a file-order map into [row, col, foot] and back.
template <typename T>
std::vector<T> to_channels_last(std::span<const double> file_order);
std::vector<double> from_channels_last(std::span<const float> channels_last);
std::vector<double> from_channels_last(std::span<const double> channels_last);

/// Synthetic insole outline used when no capture-system mask is available.
/// Rows run toe (0) to heel (59); the right foot mirrors the left.
FootMask canonical_footmask();

extern template std::vector<float> to_channels_last<float>(std::span<const double>);
extern template std::vector<double> to_channels_last<double>(std::span<const double>);

}  // namespace p2p::pressure
