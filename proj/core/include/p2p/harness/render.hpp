#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "p2p/pressure/pressure.hpp"

namespace p2p::harness {

inline constexpr std::size_t kColorBins = 256;

using Rgb = std::array<std::uint8_t, 3>;

/// Blue -> cyan -> green -> yellow -> red, bin 0 to kColorBins - 1.
Rgb colormap(std::size_t bin);

/// Bin of `kpa` on a [0, max_kpa] scale; max_kpa maps to the top bin and a
/// non-positive scale maps everything to bin 0.
std::size_t color_bin(double kpa, double max_kpa);

struct Panel {
  std::string title;
  pressure::PressureGrid grid;
};

struct RenderOptions {
  std::size_t cell_px = 6;
  std::size_t gap_px = 6;
  /// Color-bar tick count written to the metadata.
  std::size_t ticks = 5;
};

/// Binary PPM (P6) with the panels side by side, each showing the left and
/// right insole. All panels share the [0, max] scale over every masked cell;
/// off-mask cells and gaps use the lowest color. Header comments record the
/// scale, the colormap and each panel's title, maximum and color-bar values
/// in kPa.
void render_panels(const std::filesystem::path& path, std::span<const Panel> panels,
                   const RenderOptions& options = {});

/// Ground truth, prediction and their absolute difference.
void render_comparison(const std::filesystem::path& path, const pressure::PressureGrid& gt,
                       const pressure::PressureGrid& pred, const RenderOptions& options = {});

}  // namespace p2p::harness
