#include "p2p/autodiff/adam.hpp"

#include <cmath>

#include "p2p/error.hpp"

namespace p2p::ad {

void AdamState::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
}

template <typename T>
void adam_step(std::span<Parameter<T>> params, AdamState& state) {
  state.validate();
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam: optimizer state was created for a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].tensor.has_grad()) throw DataError("adam: no gradient for parameter " + params[i].name);
    if (state.m[i].size() != params[i].tensor.size()) {
      throw ConfigError("adam: moment size mismatch for parameter " + params[i].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  // Locals keep the compiler from reloading state fields after every store.
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  const double step_size = state.learning_rate / correction1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(correction2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& tensor = params[i].tensor;
    T* w = tensor.mutable_data().data();
    const T* g = tensor.grad().data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const std::size_t n = tensor.size();
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      // lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections folded in.
      w[j] = static_cast<T>(w[j] - step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_c2 + eps));
    }
    tensor.clear_grad();
  }
}

template void adam_step<float>(std::span<Parameter<float>>, AdamState&);
template void adam_step<double>(std::span<Parameter<double>>, AdamState&);

}  // namespace p2p::ad
