#include "p2p/harness/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "p2p/csv.hpp"
#include "p2p/error.hpp"

namespace p2p::harness {

namespace fs = std::filesystem;

Rgb colormap(std::size_t bin) {
  constexpr std::array<std::array<double, 3>, 5> stops{{{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0},
                                                         {255, 0, 0}}};
  const double t = static_cast<double>(std::min(bin, kColorBins - 1)) / static_cast<double>(kColorBins - 1);
  const double pos = t * static_cast<double>(stops.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double f = pos - static_cast<double>(i);
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
  }
  return out;
}

std::size_t color_bin(double kpa, double max_kpa) {
  if (!(max_kpa > 0.0) || !(kpa > 0.0)) return 0;
  const double scaled = std::floor(kpa / max_kpa * static_cast<double>(kColorBins));
  return std::min(static_cast<std::size_t>(scaled), kColorBins - 1);
}

void render_panels(const fs::path& path, std::span<const Panel> panels, const RenderOptions& options) {
  if (panels.empty()) throw ConfigError("render: no panels");
  if (options.cell_px == 0) throw ConfigError("render: cell_px must be positive");
  using pressure::kCols;
  using pressure::kRows;

  std::vector<double> panel_max(panels.size(), 0.0);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& g = panels[p].grid;
    for (std::size_t i = 0; i < pressure::kCells; ++i) {
      if (g.mask.valid[i]) panel_max[p] = std::max(panel_max[p], g.kpa[i]);
    }
  }
  const double scale = *std::max_element(panel_max.begin(), panel_max.end());

  const std::size_t foot_w = kCols * options.cell_px;
  const std::size_t panel_w = 2 * foot_w + options.gap_px;
  const std::size_t width = panels.size() * panel_w + (panels.size() - 1) * options.gap_px;
  const std::size_t height = kRows * options.cell_px;
  const Rgb low = colormap(0);
  std::vector<std::uint8_t> pixels(width * height * 3);
  for (std::size_t i = 0; i < width * height; ++i) std::copy(low.begin(), low.end(), pixels.begin() + 3 * i);

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& g = panels[p].grid;
    for (std::size_t foot = 0; foot < pressure::kFeet; ++foot) {
      const std::size_t x0 = p * (panel_w + options.gap_px) + foot * (foot_w + options.gap_px);
      for (std::size_t r = 0; r < kRows; ++r) {
        for (std::size_t c = 0; c < kCols; ++c) {
          const std::size_t i = pressure::cell_index(foot, r, c);
          const Rgb color = g.mask.valid[i] ? colormap(color_bin(g.kpa[i], scale)) : low;
          for (std::size_t dy = 0; dy < options.cell_px; ++dy) {
            const std::size_t y = r * options.cell_px + dy;
            for (std::size_t dx = 0; dx < options.cell_px; ++dx) {
              const std::size_t x = x0 + c * options.cell_px + dx;
              std::copy(color.begin(), color.end(), pixels.begin() + 3 * (y * width + x));
            }
          }
        }
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n";
  out << "# colormap blue-cyan-green-yellow-red, " << kColorBins << " bins over [0, scale_max_kpa]\n";
  out << "# scale_max_kpa " << csv::format_double(scale) << '\n';
  const std::size_t ticks = std::max<std::size_t>(options.ticks, 2);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    out << "# panel " << p << " title " << panels[p].title << " max_kpa " << csv::format_double(panel_max[p])
        << " colorbar_kpa";
    for (std::size_t t = 0; t < ticks; ++t) {
      out << ' ' << csv::format_double(scale * static_cast<double>(t) / static_cast<double>(ticks - 1));
    }
    out << '\n';
  }
  out << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

void render_comparison(const fs::path& path, const pressure::PressureGrid& gt, const pressure::PressureGrid& pred,
                       const RenderOptions& options) {
  Panel diff{"abs_error", gt};
  for (std::size_t i = 0; i < pressure::kCells; ++i) {
    diff.grid.mask.valid[i] = gt.mask.valid[i] && pred.mask.valid[i];
    diff.grid.kpa[i] = diff.grid.mask.valid[i] ? std::abs(gt.kpa[i] - pred.kpa[i]) : 0.0;
  }
  const std::array<Panel, 3> panels{Panel{"ground_truth", gt}, Panel{"prediction", pred}, diff};
  render_panels(path, panels, options);
}

}  // namespace p2p::harness
