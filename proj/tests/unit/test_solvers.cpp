#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dipa/random.hpp"
#include "dipa/solvers.hpp"
#include "oracles.hpp"

using namespace dipa;

namespace {

std::vector<SensingOperator> operators() {
  return {SensingOperator::mri(8, 8, 2.0, 0.25, 1), SensingOperator::spc(8, 8, 0.5, 0.125),
          SensingOperator::sr(8, 8, 2, 1.0)};
}

oracle::Matrix as_matrix(const Tensor& m) {
  const std::size_t n = m.shape()[0];
  oracle::Matrix a = oracle::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = m.at(i, j);
  }
  return a;
}

}  // namespace

class SolverOracle : public ::testing::TestWithParam<Scheme> {};

TEST_P(SolverOracle, MatchesDenseReferenceLoop) {
  const Scheme scheme = GetParam();
  for (const auto& op : operators()) {
    const Tensor truth = Rng(2).uniform_tensor(op.image_shape(), 0.0, 1.0);
    const Tensor y = op.apply(truth);
    Tensor pm = Tensor::identity(op.pixels());
    const Tensor noise = Rng(3).normal_tensor(pm.shape(), 0.02);
    for (std::size_t i = 0; i < pm.size(); ++i) pm[i] += noise[i];
    LinearPreconditioner po(pm);

    SolverConfig config;
    config.scheme = scheme;
    config.iterations = 15;
    config.alpha = 0.5;
    config.lambda = scheme == Scheme::red ? 0.3 : 0.0;
    config.denoiser = Denoiser::dct(0.02);
    config.record_trajectory = true;
    const SolverRun run = solve(po, op, y, config, &truth);

    const oracle::Matrix a = oracle::dense(op);
    const oracle::Matrix p = as_matrix(pm);
    const std::size_t h = op.height(), w = op.width();
    const auto iterates = oracle::fista(
        a, y.vector(), [&](const oracle::Vector& g) { return oracle::mul(p, g); },
        [&](const oracle::Vector& x) { return oracle::dct_denoise(x, h, w, 0.02, true); },
        {scheme == Scheme::red, 15, 0.5, config.lambda});

    ASSERT_EQ(run.trajectory.size(), iterates.size());
    for (std::size_t k = 0; k < iterates.size(); ++k) {
      EXPECT_LT(oracle::max_diff(run.trajectory[k].iterate.vector(), iterates[k]), 1e-12) << op.describe() << " k " << k;
    }
    EXPECT_EQ(run.final, run.trajectory.back().iterate);
    EXPECT_TRUE(run.trajectory.back().psnr.has_value());
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, SolverOracle, ::testing::Values(Scheme::pnp, Scheme::red));

TEST(Solvers, MomentumSequence) {
  MomentumStep s = momentum_next(1.0);
  EXPECT_NEAR(s.t, (1.0 + std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(s.weight, 0.0, 1e-15);
  double t = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const MomentumStep n = momentum_next(t);
    EXPECT_GT(n.t, t);
    EXPECT_GE(n.weight, 0.0);
    EXPECT_LT(n.weight, 1.0);
    t = n.t;
  }
}

TEST(Solvers, UnacceleratedIsPlainIteration) {
  const auto op = SensingOperator::spc(4, 4, 0.5, 0.25);
  const Tensor truth = Rng(4).uniform_tensor({4, 4}, 0.0, 1.0);
  const Tensor y = op.apply(truth);
  SolverConfig config;
  config.accelerate = false;
  config.iterations = 5;
  config.denoiser = Denoiser::identity();
  IdentityPreconditioner id;
  Tensor x({4, 4});
  for (int k = 0; k < 5; ++k) {
    const Tensor g = op.data_grad(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= config.alpha * g[i];
  }
  EXPECT_LT(oracle::max_diff(solve(id, op, y, config).final.vector(), x.vector()), 1e-14);
}

TEST(Solvers, TeacherIsIdentityPreconditioned) {
  const auto op = SensingOperator::sr(8, 8, 2, 1.0);
  const Tensor y = op.apply(Rng(5).uniform_tensor({8, 8}, 0.0, 1.0));
  SolverConfig config;
  IdentityPreconditioner id;
  EXPECT_EQ(run_teacher(op, y, config).final, solve(id, op, y, config).final);
}

TEST(Solvers, SchemeCheckedEntryPoints) {
  const auto op = SensingOperator::spc(4, 4, 0.5);
  const Tensor y = op.apply(Tensor({4, 4}, 0.5));
  IdentityPreconditioner id;
  SolverConfig pnp;
  SolverConfig red;
  red.scheme = Scheme::red;
  EXPECT_NO_THROW(solve_pnp(id, op, y, pnp));
  EXPECT_NO_THROW(solve_red(id, op, y, red));
  EXPECT_THROW(solve_pnp(id, op, y, red), std::invalid_argument);
  EXPECT_THROW(solve_red(id, op, y, pnp), std::invalid_argument);
}

TEST(Solvers, ConfigValidation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.iterations = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_scheme(to_string(Scheme::red)), Scheme::red);
  EXPECT_THROW(parse_scheme("admm"), std::invalid_argument);
}

TEST(Solvers, DivergenceIsReported) {
  const auto op = SensingOperator::spc(4, 4, 0.5);
  const Tensor y = op.apply(Tensor({4, 4}, 1.0));
  SolverConfig config;
  config.alpha = 1e3;
  config.iterations = 400;
  config.denoiser = Denoiser::identity();
  IdentityPreconditioner id;
  try {
    solve(id, op, y, config);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.iteration(), 1);
  }
}

TEST(Solvers, TapedSolveGradientMatchesFiniteDifferences) {
  const auto op = SensingOperator::spc(4, 4, 0.5, 0.25);
  const Tensor truth = Rng(6).uniform_tensor({4, 4}, 0.0, 1.0);
  const Tensor y = op.apply(truth);
  SolverConfig config;
  config.iterations = 3;
  config.denoiser = Denoiser::dct(0.05);
  const Tensor m0 = Tensor::identity(16);
  auto f = [&](Var m) {
    Tape& t = m.tape();
    LinearPreconditioner po(16);
    const std::vector<Var> params{m};
    return sum_squares(sub(solve_on_tape(po, params, op, t.constant(y), config).final, t.constant(truth)));
  };
  EXPECT_LT(check_gradient(f, m0, 1e-6).max_relative_error, 1e-4);
}
