#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "p2p/model/pressnet.hpp"
#include "p2p/pressure/pressure.hpp"

namespace ad = p2p::ad;
namespace model = p2p::model;

namespace {

ad::Tensor<float> batch(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  std::vector<float> v(n * 48);
  for (auto& x : v) x = g(rng);
  return ad::Tensor<float>::constant({n, 48}, std::move(v));
}

void BM_PressNetForward(benchmark::State& state) {
  auto net = model::build_pressnet<float>(model::PressNetConfig{}, p2p::pressure::canonical_footmask(), 42);
  auto x = batch(static_cast<std::size_t>(state.range(0)));
  model::ForwardContext ctx;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, ctx).data().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PressNetForward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PressNetTrainStep(benchmark::State& state) {
  auto net = model::build_pressnet<float>(model::PressNetConfig{}, p2p::pressure::canonical_footmask(), 42);
  auto x = batch(32);
  auto target = ad::Tensor<float>::zeros({32, 60, 21, 2});
  std::mt19937_64 rng(7);
  model::ForwardContext ctx{ad::Mode::train, &rng};
  ad::AdamState state_adam;
  for (auto _ : state) {
    auto loss = ad::mse_loss(net.forward(x, ctx), target);
    loss.backward();
    ad::adam_step<float>(net.parameters(), state_adam);
    for (auto& p : net.parameters()) p.tensor.clear_grad();
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_PressNetTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
