#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dipa/operators.hpp"
#include "dipa/random.hpp"
#include "oracles.hpp"

using namespace dipa;

namespace {

std::vector<SensingOperator> all_operators() {
  return {SensingOperator::mri(8, 8, 4.0, 0.25, 3), SensingOperator::spc(8, 8, 0.25, 0.125),
          SensingOperator::spc(4, 8, 0.5), SensingOperator::sr(8, 8, 2, 1.0), SensingOperator::sr(6, 9, 3, 0.7)};
}

double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Operators, AdjointDotTest) {
  std::uint64_t seed = 1;
  for (const auto& op : all_operators()) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor x = Rng(seed++).normal_tensor(op.image_shape());
      const Tensor y = Rng(seed++).normal_tensor(op.measurement_shape());
      const double lhs = inner(op.apply(x), y);
      const double rhs = inner(x, op.adjoint(y));
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs))) << op.describe();
    }
  }
}

TEST(Operators, DenseMatrixMatchesClosedForm) {
  for (const auto& op : all_operators()) {
    const oracle::Matrix a = oracle::dense(op);
    ASSERT_EQ(a.size(), Tensor(op.measurement_shape()).size()) << op.describe();
    for (std::size_t j = 0; j < op.pixels(); ++j) {
      Tensor e(op.image_shape());
      e[j] = 1.0;
      const Tensor col = op.apply(e);
      for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(col[i], a[i][j], 1e-10) << op.describe();
    }
  }
}

TEST(Operators, GramMatrixIsATransposeA) {
  for (const auto& op : all_operators()) {
    const oracle::Matrix a = oracle::dense(op);
    const Tensor g = op.gram_matrix();
    const std::size_t n = op.pixels();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (const auto& row : a) ref += row[i] * row[j];
        ASSERT_NEAR(g.at(i, j), ref, 1e-10) << op.describe();
      }
    }
  }
}

TEST(Operators, TapeAndTensorPathsAgree) {
  for (const auto& op : all_operators()) {
    const Tensor x = Rng(20).normal_tensor(op.image_shape());
    const Tensor y = Rng(21).normal_tensor(op.measurement_shape());
    Tape tape;
    Var xv = tape.leaf(x), yv = tape.constant(y);
    EXPECT_LT(oracle::max_diff(op.apply(xv).value().vector(), op.apply(x).vector()), 1e-14);
    EXPECT_LT(oracle::max_diff(op.data_grad(xv, yv).value().vector(), op.data_grad(x, y).vector()), 1e-12);
    EXPECT_NEAR(op.data_fidelity(xv, yv).value().item(), op.data_fidelity(x, y), 1e-10);
    auto f = [&](Var v) { return op.data_fidelity(v, v.tape().constant(y)); };
    EXPECT_LT(check_gradient(f, x, 1e-6).max_relative_error, 1e-6) << op.describe();
    // grad of ||y - Ax||^2 is 2 A^T (A x - y)
    const Tensor g = tape.grad(op.data_fidelity(xv, yv), std::vector<Var>{xv})[0];
    const Tensor dg = op.data_grad(x, y);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.0 * dg[i], 1e-10);
  }
}

TEST(Operators, MriMaskHasCenterBandAndTargetRate) {
  const auto op = SensingOperator::mri(32, 32, 4.0, 0.125, 7);
  const auto& mask = op.mask();
  std::vector<bool> column(32, false);
  for (std::size_t c = 0; c < 32; ++c) column[c] = mask[c] != 0;
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(mask[r * 32 + c] != 0, column[c]);
  }
  std::size_t sampled = 0;
  for (bool b : column) sampled += b;
  EXPECT_EQ(sampled, 8u);
  EXPECT_DOUBLE_EQ(op.acceleration_factor(), 4.0);
  // DC column is always sampled.
  EXPECT_TRUE(column[0]);
  const auto again = SensingOperator::mri(32, 32, 4.0, 0.125, 7);
  EXPECT_EQ(again.mask(), mask);
}

TEST(Operators, SpcRowsAndRatios) {
  const auto op = SensingOperator::spc(16, 16, 0.25, 1.0 / 16.0);
  EXPECT_EQ(op.measurements(), 64u);
  EXPECT_DOUBLE_EQ(op.compression_ratio(), 0.25);
  EXPECT_EQ(op.measurement_shape(), (Shape{64}));
  // Orthonormal rows: A A^T = I.
  const oracle::Matrix a = oracle::dense(op);
  for (std::size_t i = 0; i < 64; i += 7) {
    for (std::size_t j = 0; j < 64; j += 5) {
      double s = 0.0;
      for (std::size_t k = 0; k < 256; ++k) s += a[i][k] * a[j][k];
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
  }
  EXPECT_THROW(SensingOperator::spc(6, 6, 0.5), std::invalid_argument);
}

TEST(Operators, SrShapeAndKernel) {
  const auto op = SensingOperator::sr(8, 12, 4, 1.2);
  EXPECT_EQ(op.measurement_shape(), (Shape{2, 3}));
  EXPECT_DOUBLE_EQ(op.resolution_factor(), 4.0);
  double total = 0.0;
  for (double v : op.blur_kernel().vector()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-14);
  EXPECT_THROW(SensingOperator::sr(8, 10, 4, 1.0), std::invalid_argument);
}

TEST(Operators, RejectsMismatchedShapes) {
  const auto op = SensingOperator::spc(4, 4, 0.5);
  EXPECT_THROW(op.apply(Tensor({4, 5})), std::invalid_argument);
  EXPECT_THROW(op.adjoint(Tensor({3})), std::invalid_argument);
}

TEST(Operators, SimulatedNoiseIsSeededAndScaled) {
  const auto op = SensingOperator::mri(16, 16, 2.0, 0.25, 1);
  const Tensor x = Rng(2).uniform_tensor({16, 16}, 0.0, 1.0);
  const Measurement a = simulate_measurement(op, x, 0.1, 42);
  const Measurement b = simulate_measurement(op, x, 0.1, 42);
  EXPECT_EQ(a.values, b.values);
  const Tensor clean = op.apply(x);
  double var = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) var += std::pow(a.values[i] - clean[i], 2);
  var /= static_cast<double>(clean.size());
  EXPECT_NEAR(std::sqrt(var), 0.1, 0.02);
  const ComplexPair c = a.as_complex();
  EXPECT_EQ(c.real.size(), op.measurements());
  EXPECT_EQ(simulate_measurement(op, x, 0.0, 9).values, clean);
}

TEST(Operators, ModalityNames) {
  for (auto m : {Modality::mri, Modality::spc, Modality::sr}) EXPECT_EQ(parse_modality(to_string(m)), m);
  EXPECT_THROW(parse_modality("ct"), std::invalid_argument);
}
