#include <benchmark/benchmark.h>

#include <cmath>

#include "dipa/autodiff.hpp"
#include "dipa/harness.hpp"
#include "dipa/operators.hpp"
#include "dipa/preconditioners.hpp"
#include "dipa/solvers.hpp"
#include "dipa/tape.hpp"

namespace {

constexpr std::size_t kSide = 16;

// Records a full 20-iteration solve and differentiates the squared error
// with respect to the preconditioner parameters.
void unrolled(benchmark::State& state, const dipa::Preconditioner& po) {
  const auto op = dipa::SensingOperator::spc(kSide, kSide, 0.25, 1.0 / std::sqrt(double(kSide * kSide)));
  const auto image = dipa::synthetic_images(1, kSide, kSide, 0, 4, 5).front();
  const auto y = dipa::simulate_measurement(op, image, 0.01, 6).values;
  dipa::SolverConfig config;
  config.denoiser = dipa::Denoiser::dct(0.01);
  for (auto _ : state) {
    dipa::Tape tape;
    const auto params = po.bind(tape, true);
    const auto solved = dipa::solve_on_tape(po, params, op, tape.constant(y), config);
    const auto loss = dipa::sum_squares(dipa::sub(solved.final, tape.constant(image)));
    benchmark::DoNotOptimize(tape.grad(loss, params));
  }
}

void BM_UnrolledLinear(benchmark::State& state) { unrolled(state, dipa::LinearPreconditioner(kSide * kSide)); }

void BM_UnrolledNonlinear(benchmark::State& state) {
  unrolled(state, dipa::NonlinearPreconditioner::randomized(dipa::NonlinearConfig{}, kSide, kSide));
}

}  // namespace

BENCHMARK(BM_UnrolledLinear);
BENCHMARK(BM_UnrolledNonlinear);

BENCHMARK_MAIN();
