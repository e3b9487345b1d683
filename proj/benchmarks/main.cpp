#include <benchmark/benchmark.h>

#include "p2p/runtime.hpp"

int main(int argc, char** argv) {
  p2p::configure_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
