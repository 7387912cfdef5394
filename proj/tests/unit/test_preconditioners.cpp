#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dipa/preconditioners.hpp"
#include "dipa/random.hpp"
#include "oracles.hpp"

using namespace dipa;

namespace {

const NonlinearConfig kSmall{2, 4, 4, 3, 2, 5};

}  // namespace

TEST(Preconditioners, IdentityPassesThrough) {
  IdentityPreconditioner p;
  const Tensor g = Rng(1).normal_tensor({4, 4});
  EXPECT_EQ(p.apply(g, 1), g);
  EXPECT_FALSE(p.learnable());
  EXPECT_EQ(p.parameter_count(), 0u);
  EXPECT_THROW(p.apply(g, 0), std::invalid_argument);
}

TEST(Preconditioners, RidgeSolvesRegularizedSystem) {
  const auto op = SensingOperator::spc(4, 4, 0.5);
  RidgeHessianPreconditioner p(op, 0.1);
  const Tensor g = Rng(2).normal_tensor({4, 4});
  const Tensor z = p.apply(g, 3);
  const Tensor back = op.gram(z);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back[i] + 0.1 * z[i], g[i], 1e-10);
  EXPECT_THROW(RidgeHessianPreconditioner(op, 0.0), std::runtime_error);
  EXPECT_THROW(RidgeHessianPreconditioner(op, -1.0), std::invalid_argument);
  EXPECT_THROW(RidgeHessianPreconditioner(SensingOperator::spc(128, 64, 0.25), 0.1), std::invalid_argument);
}

TEST(Preconditioners, PolynomialUsesHornerOnGram) {
  const auto op = SensingOperator::sr(4, 4, 2, 0.8);
  PolynomialPreconditioner p(op, {0.5, -0.25, 2.0});
  const Tensor g = Rng(3).normal_tensor({4, 4});
  const Tensor g1 = op.gram(g);
  const Tensor g2 = op.gram(g1);
  const Tensor out = p.apply(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(out[i], 0.5 * g[i] - 0.25 * g1[i] + 2.0 * g2[i], 1e-12);
  EXPECT_THROW(PolynomialPreconditioner(op, {}), std::invalid_argument);
}

TEST(Preconditioners, NeumannCoefficientsExpandTheSeries) {
  // s sum_{i<=2} (1 - s t)^i = s (3 - 3 s t + s^2 t^2)
  const auto c = neumann_coefficients(2, 0.5);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_NEAR(c[0], 1.5, 1e-15);
  EXPECT_NEAR(c[1], -0.75, 1e-15);
  EXPECT_NEAR(c[2], 0.125, 1e-15);
  // Orthonormal SPC Gram is a projector: P G g -> g on the range as degree grows.
  const auto op = SensingOperator::spc(4, 4, 0.5, 0.25);
  PolynomialPreconditioner p(op, neumann_coefficients(12, 0.9));
  const Tensor g = op.adjoint(Rng(4).normal_tensor(op.measurement_shape()));
  EXPECT_LT(oracle::max_diff(p.apply(op.gram(g), 1).vector(), g.vector()), 1e-10);
}

TEST(Preconditioners, LinearIsMatrixVectorProduct) {
  const Tensor m = Rng(5).normal_tensor({9, 9});
  LinearPreconditioner p(m);
  const Tensor g = Rng(6).normal_tensor({3, 3});
  oracle::Matrix a = oracle::zeros(9, 9);
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 9; ++j) a[i][j] = m.at(i, j);
  }
  const auto ref = oracle::mul(a, g.vector());
  const Tensor out = p.apply(g, 2);
  EXPECT_EQ(out.shape(), g.shape());
  EXPECT_LT(oracle::max_diff(out.vector(), ref), 1e-13);
  EXPECT_EQ(LinearPreconditioner(4).matrix(), Tensor::identity(4));
  EXPECT_THROW(LinearPreconditioner(Tensor({2, 3})), std::invalid_argument);
  EXPECT_THROW(p.apply(Tensor({2, 2}), 1), std::invalid_argument);
}

TEST(Preconditioners, FlatParametersRoundTrip) {
  NonlinearPreconditioner p = NonlinearPreconditioner::randomized(kSmall, 6, 6);
  const auto flat = p.flat_parameters();
  EXPECT_EQ(flat.size(), p.parameter_count());
  NonlinearPreconditioner q(kSmall, 6, 6);
  q.load_flat_parameters(flat);
  const Tensor g = Rng(7).normal_tensor({6, 6});
  EXPECT_EQ(q.apply(g, 4), p.apply(g, 4));
  std::vector<double> short_flat(flat.begin(), flat.end() - 1);
  EXPECT_THROW(q.load_flat_parameters(short_flat), std::invalid_argument);
  const auto clone = p.clone();
  EXPECT_EQ(clone->apply(g, 4), p.apply(g, 4));
}

TEST(Preconditioners, FreshAndZeroNetworksAreIdentity) {
  const Tensor g = Rng(8).normal_tensor({6, 6});
  EXPECT_EQ(NonlinearPreconditioner(kSmall, 6, 6).apply(g, 3), g);
  EXPECT_EQ(NonlinearPreconditioner::zero(kSmall, 6, 6).apply(g, 3), g);
}

TEST(Preconditioners, RandomizedNetworkDependsOnIteration) {
  const auto p = NonlinearPreconditioner::randomized(kSmall, 6, 6);
  const Tensor g = Rng(9).normal_tensor({6, 6});
  EXPECT_GT(oracle::max_diff(p.apply(g, 1).vector(), p.apply(g, 7).vector()), 1e-8);
}

TEST(Preconditioners, NonlinearGradientsMatchFiniteDifferences) {
  const auto p = NonlinearPreconditioner::randomized(kSmall, 6, 6);
  const Tensor g0 = Rng(10).normal_tensor({6, 6});
  auto wrt_input = [&](Var g) {
    auto params = p.bind(g.tape(), false);
    return sum_squares(p.apply(g, 2, params));
  };
  EXPECT_LT(check_gradient(wrt_input, g0, 1e-6).max_relative_error, 1e-5);
  // Each parameter tensor in turn.
  for (std::size_t k = 0; k < p.parameters().size(); ++k) {
    auto f = [&](Var w) {
      Tape& t = w.tape();
      auto params = p.bind(t, false);
      params[k] = w;
      return sum_squares(p.apply(t.constant(g0), 2, params));
    };
    EXPECT_LT(check_gradient(f, p.parameters()[k], 1e-6).max_relative_error, 1e-5) << "parameter " << k;
  }
}

TEST(Preconditioners, PositionalEncoding) {
  const Tensor e = positional_encoding(3, 4);
  EXPECT_NEAR(e[0], std::sin(3.0), 1e-15);
  EXPECT_NEAR(e[1], std::cos(3.0), 1e-15);
  EXPECT_NEAR(e[2], std::sin(3.0 / 100.0), 1e-15);
  EXPECT_NEAR(e[3], std::cos(3.0 / 100.0), 1e-15);
  EXPECT_THROW(positional_encoding(1, 3), std::invalid_argument);
}

TEST(Preconditioners, LinearizationRecoversLinearMatrix) {
  const Tensor m = Rng(11).normal_tensor({16, 16});
  LinearPreconditioner p(m);
  const Tensor j = linearize(p, Tensor({4, 4}), 1, 1e-5);
  EXPECT_LT(oracle::max_diff(j.vector(), m.vector()), 1e-8);
  const Tensor z = linearize(NonlinearPreconditioner::zero(kSmall, 6, 6), Tensor({6, 6}), 1, 1e-5);
  EXPECT_LT(oracle::max_diff(z.vector(), Tensor::identity(36).vector()), 1e-10);
}

TEST(Preconditioners, LogMagnitude) {
  const Tensor m({2, 2}, std::vector<double>{0.0, -1.0, std::exp(1.0) - 1.0, 3.0});
  const Tensor l = log_magnitude(m);
  EXPECT_EQ(l[0], 0.0);
  EXPECT_NEAR(l[1], std::log(2.0), 1e-15);
  EXPECT_NEAR(l[2], 1.0, 1e-15);
  EXPECT_THROW(log_magnitude(Tensor({2, 3})), std::invalid_argument);
}
