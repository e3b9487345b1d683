#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "p2p/autodiff/tensor.hpp"

namespace p2p::ad {

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_parameter = 0;
  std::uint64_t seed = 42;
  /// Lower bound on the relative-error denominator, so entries whose true
  /// gradient is ~0 are judged by absolute error at this scale.
  double denominator_floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
  bool all_finite = true;
};

/// Compares the reverse-mode gradient of `loss` with respect to each tensor in
/// `inputs` against central finite differences. `loss` must rebuild the graph
/// from the current tensor values on every call and return a scalar.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss,
                           std::span<Parameter<double>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace p2p::ad
