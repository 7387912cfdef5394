#include <benchmark/benchmark.h>

#include <cmath>

#include "dipa/harness.hpp"
#include "dipa/operators.hpp"
#include "dipa/preconditioners.hpp"
#include "dipa/solvers.hpp"

namespace {

constexpr std::size_t kSide = 16;

dipa::SolverConfig pnp_config() {
  dipa::SolverConfig c;
  c.iterations = 20;
  c.denoiser = dipa::Denoiser::dct(0.01);
  return c;
}

void run(benchmark::State& state, const dipa::SensingOperator& op, const dipa::Preconditioner& po) {
  const auto image = dipa::synthetic_images(1, kSide, kSide, 0, 4, 5).front();
  const auto y = dipa::simulate_measurement(op, image, 0.01, 6).values;
  const auto config = pnp_config();
  for (auto _ : state) benchmark::DoNotOptimize(dipa::solve(po, op, y, config).final);
}

void BM_PnpSpcIdentity(benchmark::State& state) {
  const auto op = dipa::SensingOperator::spc(kSide, kSide, 0.25, 1.0 / std::sqrt(double(kSide * kSide)));
  run(state, op, dipa::IdentityPreconditioner());
}

void BM_PnpSpcLinear(benchmark::State& state) {
  const auto op = dipa::SensingOperator::spc(kSide, kSide, 0.25, 1.0 / std::sqrt(double(kSide * kSide)));
  run(state, op, dipa::LinearPreconditioner(kSide * kSide));
}

void BM_PnpSpcNonlinear(benchmark::State& state) {
  const auto op = dipa::SensingOperator::spc(kSide, kSide, 0.25, 1.0 / std::sqrt(double(kSide * kSide)));
  run(state, op, dipa::NonlinearPreconditioner::randomized(dipa::NonlinearConfig{}, kSide, kSide));
}

void BM_PnpMriIdentity(benchmark::State& state) {
  const auto op = dipa::SensingOperator::mri(kSide, kSide, 4.0, 0.125, 11);
  run(state, op, dipa::IdentityPreconditioner());
}

}  // namespace

BENCHMARK(BM_PnpSpcIdentity);
BENCHMARK(BM_PnpSpcLinear);
BENCHMARK(BM_PnpSpcNonlinear);
BENCHMARK(BM_PnpMriIdentity);

BENCHMARK_MAIN();
