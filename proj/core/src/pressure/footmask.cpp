#include <cmath>

#include "p2p/pressure/pressure.hpp"

namespace p2p::pressure {

namespace {

// Lateral and medial extent (columns from the foot axis at column 10) of a
// left insole, toe at row 0. The arch narrows the medial side.
struct RowExtent {
  double lateral;
  double medial;
};

RowExtent left_extent(std::size_t row) {
  const double r = static_cast<double>(row);
  if (row < 4) {
    const double w = 5.0 + 1.2 * r;  // rounded toe box
    return {w, w};
  }
  if (row < 24) return {9.0, 9.0};
  if (row < 44) {
    const double t = (r - 24.0) / 20.0;
    const double arch = 4.0 * std::sin(t * 3.14159265358979);
    return {9.0 - 2.5 * t, 9.0 - 2.5 * t - arch};
  }
  if (row < 55) return {6.5, 6.5};
  const double w = 6.5 - 1.2 * (r - 54.0);  // rounded heel
  return {w, w};
}

}  // namespace

FootMask canonical_footmask() {
  FootMask mask;
  constexpr double axis = 10.0;
  for (std::size_t r = 0; r < kRows; ++r) {
    const auto e = left_extent(r);
    for (std::size_t c = 0; c < kCols; ++c) {
      // Left foot: medial side (towards the body midline) is the high-column side.
      const double d = static_cast<double>(c) - axis;
      const bool inside = d < 0 ? -d <= e.lateral : d <= e.medial;
      if (!inside) continue;
      mask.valid[cell_index(0, r, c)] = 1;
      mask.valid[cell_index(1, r, kCols - 1 - c)] = 1;
    }
  }
  return mask;
}

}  // namespace p2p::pressure
