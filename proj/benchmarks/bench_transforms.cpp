#include <benchmark/benchmark.h>

#include "dipa/random.hpp"
#include "dipa/transforms.hpp"

namespace {

dipa::Tensor random_image(std::size_t side) {
  dipa::Rng rng(1);
  return rng.uniform_tensor({side, side}, 0.0, 1.0);
}

void BM_Dft2(benchmark::State& state) {
  const auto image = random_image(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dipa::dft2(image));
}

void BM_Dct2(benchmark::State& state) {
  const auto image = random_image(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dipa::dct2(image));
}

void BM_Fwht(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  dipa::Rng rng(2);
  const auto x = rng.normal_tensor({side * side});
  for (auto _ : state) benchmark::DoNotOptimize(dipa::fwht(x));
}

}  // namespace

BENCHMARK(BM_Dft2)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_Dct2)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_Fwht)->Arg(16)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
