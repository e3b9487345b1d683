#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p2p/autodiff/tensor.hpp"

namespace p2p::ad {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  /// Throws ConfigError unless 0 <= beta < 1 and epsilon > 0.
  void validate() const;
};

/// One bias-corrected Adam update of every parameter, then clears the
/// gradients. Throws DataError when a parameter received no gradient since the
/// previous step; moment buffers are sized on the first call.
template <typename T>
void adam_step(std::span<Parameter<T>> params, AdamState& state);

extern template void adam_step<float>(std::span<Parameter<float>>, AdamState&);
extern template void adam_step<double>(std::span<Parameter<double>>, AdamState&);

}  // namespace p2p::ad
