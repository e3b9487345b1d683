#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "p2p/pressure/pressure.hpp"

namespace p2p::metrics {

inline constexpr double kCellPitchMm = 5.08;

/// Mean |Y - Yhat| in kPa over the masked prexels. Both grids must carry the
/// same mask; an empty mask is a DataError.
double mean_absolute_error_kpa(const pressure::PressureGrid& y, const pressure::PressureGrid& yhat);

/// Cell (row 0, col 0) sits at the origin; x runs along columns, y along rows.
struct CopPoint {
  double x_mm = 0.0;
  double y_mm = 0.0;
  bool defined = false;
};

struct FootCop {
  CopPoint left;
  CopPoint right;
};

/// Pressure-weighted mean prexel position of one foot. Undefined when that
/// foot carries no pressure.
CopPoint center_of_pressure(const pressure::PressureGrid& grid, pressure::Foot foot,
                            double pitch_mm = kCellPitchMm);
FootCop center_of_pressure(const pressure::PressureGrid& grid, double pitch_mm = kCellPitchMm);

/// Euclidean distance in mm, or nullopt when either point is undefined.
std::optional<double> cop_error_l2(const CopPoint& gt, const CopPoint& pred);

struct ErrorSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
  std::size_t count = 0;
};

/// Throws DataError on an empty series.
ErrorSummary summarize_errors(std::span<const double> errors);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-tailed
  std::size_t df = 0;
};

/// Paired t-test on a - b with n - 1 degrees of freedom. Throws DataError for
/// unequal or too short series and NumericalError("degenerate sample") when
/// the differences have zero variance.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

}  // namespace p2p::metrics
