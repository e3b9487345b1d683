#include "p2p/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace p2p::ad {

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss,
                           std::span<Parameter<double>> inputs,
                           const GradCheckOptions& options) {
  for (auto& p : inputs) p.tensor.clear_grad();
  const Tensor<double> root = loss();
  root.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& p : inputs) {
    if (p.tensor.has_grad()) {
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      analytic.emplace_back(p.tensor.size(), 0.0);
    }
    p.tensor.clear_grad();
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
    auto values = inputs[pi].tensor.mutable_data();
    std::vector<std::size_t> entries(values.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_parameter > 0 && entries.size() > options.max_entries_per_parameter) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_parameter);
    }
    for (const std::size_t i : entries) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = loss().item();
      values[i] = original - options.step;
      const double minus = loss().item();
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double exact = analytic[pi][i];
      if (!std::isfinite(numeric) || !std::isfinite(exact)) report.all_finite = false;
      const double abs_err = std::abs(numeric - exact);
      const double denom = std::max({std::abs(numeric), std::abs(exact), options.denominator_floor});
      const double rel_err = abs_err / denom;
      ++report.entries_checked;
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      if (rel_err > report.max_relative_error || report.entries_checked == 1) {
        report.max_relative_error = std::max(report.max_relative_error, rel_err);
        report.worst_parameter = inputs[pi].name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace p2p::ad
