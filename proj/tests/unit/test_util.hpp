#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "p2p/autodiff/tensor.hpp"

namespace p2p::test {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline ad::Parameter<double> param(const std::string& name, ad::Shape shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  const auto n = ad::element_count(shape);
  return {name, ad::Tensor<double>::leaf(std::move(shape), random_values(n, rng, lo, hi), true)};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("p2p_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace p2p::test
