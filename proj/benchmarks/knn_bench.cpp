#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "p2p/knn/knn.hpp"

namespace knn = p2p::knn;

namespace {

knn::PoseFeatures random_features(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  knn::PoseFeatures f;
  for (auto& v : f.values) v = g(rng);
  for (auto& c : f.confidence) c = 0.9;
  return f;
}

void BM_KnnQuery(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::vector<knn::Sample> samples(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].ref.frame_id = static_cast<std::int64_t>(i);
    samples[i].features = random_features(rng);
  }
  const auto index = knn::build_index(samples, 1);
  const auto query = random_features(rng);
  for (auto _ : state) benchmark::DoNotOptimize(knn::nearest_entry(index, query));
}
BENCHMARK(BM_KnnQuery)->Arg(1000)->Arg(10000);

}  // namespace
