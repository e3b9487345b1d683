#include "p2p/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "p2p/error.hpp"

namespace p2p::metrics {

using pressure::kCols;
using pressure::kRows;

double mean_absolute_error_kpa(const pressure::PressureGrid& y, const pressure::PressureGrid& yhat) {
  if (!(y.mask == yhat.mask)) throw DataError("MAE: ground truth and prediction masks differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pressure::kCells; ++i) {
    if (!y.mask.valid[i]) continue;
    sum += std::abs(y.kpa[i] - yhat.kpa[i]);
    ++n;
  }
  if (n == 0) throw DataError("MAE: mask is empty");
  return sum / static_cast<double>(n);
}

CopPoint center_of_pressure(const pressure::PressureGrid& grid, pressure::Foot foot, double pitch_mm) {
  const auto f = static_cast<std::size_t>(foot);
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < kRows; ++r) {
    for (std::size_t c = 0; c < kCols; ++c) {
      const auto i = pressure::cell_index(f, r, c);
      if (!grid.mask.valid[i]) continue;
      const double p = grid.kpa[i];
      total += p;
      sx += p * static_cast<double>(c);
      sy += p * static_cast<double>(r);
    }
  }
  if (!(total > 0.0)) return {};
  return {pitch_mm * sx / total, pitch_mm * sy / total, true};
}

FootCop center_of_pressure(const pressure::PressureGrid& grid, double pitch_mm) {
  return {center_of_pressure(grid, pressure::Foot::left, pitch_mm),
          center_of_pressure(grid, pressure::Foot::right, pitch_mm)};
}

std::optional<double> cop_error_l2(const CopPoint& gt, const CopPoint& pred) {
  if (!gt.defined || !pred.defined) return std::nullopt;
  return std::hypot(gt.x_mm - pred.x_mm, gt.y_mm - pred.y_mm);
}

ErrorSummary summarize_errors(std::span<const double> errors) {
  if (errors.empty()) throw DataError("summarize_errors: empty series");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  ErrorSummary s;
  s.count = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  const auto mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  double sum = 0.0;
  for (double e : sorted) sum += e;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (double e : sorted) ss += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

}  // namespace p2p::metrics
