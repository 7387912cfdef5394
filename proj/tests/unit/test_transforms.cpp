#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dipa/random.hpp"
#include "dipa/transforms.hpp"
#include "oracles.hpp"

using namespace dipa;

namespace {

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      y[k] += x[j] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k * j % n) / n);
    }
  }
  return y;
}

}  // namespace

class FftLength : public ::testing::TestWithParam<std::size_t> {};

TEST_P(FftLength, MatchesNaiveDft) {
  const std::size_t n = GetParam();
  Rng rng(n);
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  for (bool inverse : {false, true}) {
    auto y = x;
    fft(y, inverse);
    const auto ref = naive_dft(x, inverse);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(y[k] - ref[k]), 1e-10 * n) << n << " " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(PowersAndOthers, FftLength, ::testing::Values(1, 2, 8, 64, 3, 12, 15, 100));

TEST(Transforms, PowerOfTwo) {
  EXPECT_TRUE(is_power_of_two(1));
  EXPECT_TRUE(is_power_of_two(256));
  EXPECT_FALSE(is_power_of_two(0));
  EXPECT_FALSE(is_power_of_two(12));
}

TEST(Transforms, Dft2IsUnitaryAndInvertible) {
  const Tensor x = Rng(5).normal_tensor({6, 8});
  const ComplexPair s = dft2(x);
  double energy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) energy += s.real[i] * s.real[i] + s.imag[i] * s.imag[i];
  double norm2 = 0.0;
  for (double v : x.vector()) norm2 += v * v;
  EXPECT_NEAR(energy, norm2, 1e-10);
  EXPECT_LT(oracle::max_diff(idft2(s).vector(), x.vector()), 1e-12);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = 0; v < 8; ++v) {
      std::complex<double> ref;
      for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 8; ++c) ref += oracle::dft_entry(6, 8, u, v, r, c) * x[r * 8 + c];
      }
      EXPECT_NEAR(s.real[u * 8 + v], ref.real(), 1e-12);
      EXPECT_NEAR(s.imag[u * 8 + v], ref.imag(), 1e-12);
    }
  }
}

TEST(Transforms, FwhtMatchesSylvesterMatrix) {
  const std::size_t n = 32;
  const Tensor x = Rng(6).normal_tensor({n});
  const auto ref = oracle::mul(oracle::hadamard(n), x.vector());
  const Tensor y = fwht(x);
  EXPECT_LT(oracle::max_diff(y.vector(), ref), 1e-12);
  const Tensor back = fwht(y);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], n * x[i], 1e-11);
}

TEST(Transforms, SequencyOrderCountsSignChanges) {
  for (std::size_t n : {1u, 2u, 16u, 256u}) {
    const auto order = sequency_order(n);
    const auto h = oracle::hadamard(n);
    ASSERT_EQ(order.size(), n);
    for (std::size_t s = 0; s < n; ++s) EXPECT_EQ(oracle::sign_changes(h[order[s]]), s);
  }
}

TEST(Transforms, Dct2MatchesMatrixDefinition) {
  const Tensor x = Rng(7).normal_tensor({5, 8});
  const Tensor c = dct2(x);
  EXPECT_LT(oracle::max_diff(c.vector(), oracle::dct2(x.vector(), 5, 8)), 1e-12);
  EXPECT_LT(oracle::max_diff(idct2(c).vector(), x.vector()), 1e-12);
}

TEST(Transforms, TapeVersionsAgreeAndDifferentiate) {
  const Tensor x0 = Rng(8).normal_tensor({4, 6});
  Tape tape;
  Var x = tape.leaf(x0);
  EXPECT_LT(oracle::max_diff(dct2(x).value().vector(), dct2(x0).vector()), 1e-15);
  const Tensor stacked = dft2(x).value();
  EXPECT_EQ(stacked.shape(), (Shape{2, 4, 6}));
  EXPECT_LT(oracle::max_diff(idft2_real(dft2(x)).value().vector(), x0.vector()), 1e-12);

  const Tensor w = Rng(9).normal_tensor({4, 6});
  auto f_dct = [&](Var v) { return dot(idct2(scale(dct2(v), 2.0)), v.tape().constant(w)); };
  auto f_dft = [&](Var v) { return sum_squares(mul(idft2_real(dft2(v)), v.tape().constant(w))); };
  auto f_wht = [&](Var v) { return sum_squares(fwht(v)); };
  EXPECT_LT(check_gradient(f_dct, x0, 1e-6).max_relative_error, 1e-6);
  // The round trip is the identity, so the exact gradient is 2 x w^2.
  Var v = tape.leaf(x0);
  const Tensor g = tape.grad(f_dft(v), std::vector<Var>{v})[0];
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.0 * x0[i] * w[i] * w[i], 1e-12);
  EXPECT_LT(check_gradient(f_wht, Rng(10).normal_tensor({16}), 1e-6).max_relative_error, 1e-6);
}
