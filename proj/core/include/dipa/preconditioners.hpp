#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "dipa/operators.hpp"
#include "dipa/tape.hpp"
#include "dipa/tensor.hpp"

namespace dipa {

// Preconditioning operator applied to the data-fidelity gradient inside the
// solvers. Learnable operators own their parameter tensors; bind() places
// them on a tape and apply() consumes the returned vars.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;

  virtual std::string_view kind() const = 0;
  virtual std::unique_ptr<Preconditioner> clone() const = 0;

  // Preconditioned gradient for iteration k >= 1.
  Var apply(Var gradient, int iteration, std::span<const Var> params) const;
  // Evaluates on a private tape.
  Tensor apply(const Tensor& gradient, int iteration) const;

  // Leaves (trainable) or constants for every parameter tensor, in order.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  std::span<Tensor> parameters() { return params_; }
  std::span<const Tensor> parameters() const { return params_; }
  std::size_t parameter_count() const;
  bool learnable() const { return !params_.empty(); }

  // Parameters concatenated in declaration order.
  std::vector<double> flat_parameters() const;
  void load_flat_parameters(std::span<const double> values);

 protected:
  virtual Var do_apply(Var gradient, int iteration, std::span<const Var> params) const = 0;

  std::vector<Tensor> params_;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  std::string_view kind() const override { return "identity"; }
  std::unique_ptr<Preconditioner> clone() const override;

 protected:
  Var do_apply(Var gradient, int, std::span<const Var>) const override { return gradient; }
};

// Solves (A^T A + eta I) z = g with a Cholesky factor of the dense Gram
// matrix. Limited to n <= 4096; throws when the system is singular.
class RidgeHessianPreconditioner final : public Preconditioner {
 public:
  static constexpr std::size_t kMaxPixels = 4096;

  RidgeHessianPreconditioner(const SensingOperator& op, double eta);

  std::string_view kind() const override { return "ridge_hessian"; }
  std::unique_ptr<Preconditioner> clone() const override;
  double eta() const { return eta_; }
  // Dense (A^T A + eta I), kept for verification.
  const Tensor& system_matrix() const { return system_; }

 protected:
  Var do_apply(Var gradient, int, std::span<const Var>) const override;

 private:
  struct Factor;
  double eta_;
  Tensor system_;
  std::shared_ptr<const Factor> factor_;
};

// sum_i c_i (A^T A)^i g, evaluated by Horner's rule with operator applies.
class PolynomialPreconditioner final : public Preconditioner {
 public:
  PolynomialPreconditioner(const SensingOperator& op, std::vector<double> coefficients);

  std::string_view kind() const override { return "polynomial"; }
  std::unique_ptr<Preconditioner> clone() const override;
  const std::vector<double>& coefficients() const { return coefficients_; }

 protected:
  Var do_apply(Var gradient, int, std::span<const Var>) const override;

 private:
  SensingOperator op_;
  std::vector<double> coefficients_;
};

// Coefficients of s * sum_{i=0}^{degree} (I - s G)^i as a polynomial in G,
// the truncated Neumann series for G^{-1}.
std::vector<double> neumann_coefficients(std::size_t degree, double step);

// Unconstrained dense n x n matrix acting on the flattened gradient.
class LinearPreconditioner final : public Preconditioner {
 public:
  // Identity initialization.
  explicit LinearPreconditioner(std::size_t pixels);
  explicit LinearPreconditioner(Tensor matrix);

  std::string_view kind() const override { return "linear"; }
  std::unique_ptr<Preconditioner> clone() const override;
  const Tensor& matrix() const { return params_[0]; }
  std::size_t pixels() const { return params_[0].shape()[0]; }

 protected:
  Var do_apply(Var gradient, int, std::span<const Var> params) const override;
};

struct NonlinearConfig {
  std::size_t blocks = 3;
  std::size_t features = 16;
  std::size_t encoding_dims = 8;
  std::size_t kernel_size = 7;
  std::size_t expansion = 2;
  std::uint64_t seed = 0;
};

// Small convolutional network with iteration encoding:
//
//   f0 = lift(g)                                   1 -> F channels
//   f  = f + pw2(silu(pw1(dw(f))))                 per block
//   f  = f + W phi(k)                              after the first block
//   P(g, k) = g + project(f)                       F -> 1 channel
//
// dw is a depthwise k x k convolution, pw1/pw2 pointwise convolutions with
// F * expansion hidden channels. The projection starts at zero, so a fresh
// network is the identity operator.
class NonlinearPreconditioner final : public Preconditioner {
 public:
  NonlinearPreconditioner(const NonlinearConfig& config, std::size_t height, std::size_t width);

  // Every weight zero: exactly the residual identity.
  static NonlinearPreconditioner zero(const NonlinearConfig& config, std::size_t height, std::size_t width);
  // Like the constructor but with a nonzero projection, so the output
  // depends on every parameter and on the iteration.
  static NonlinearPreconditioner randomized(const NonlinearConfig& config, std::size_t height, std::size_t width);

  std::string_view kind() const override { return "nonlinear"; }
  std::unique_ptr<Preconditioner> clone() const override;
  const NonlinearConfig& config() const { return config_; }

 protected:
  Var do_apply(Var gradient, int iteration, std::span<const Var> params) const override;

 private:
  NonlinearConfig config_;
  std::size_t height_;
  std::size_t width_;
};

// phi(k): entry 2i = sin(k / 10000^(2i/dims)), entry 2i+1 = cos(same).
Tensor positional_encoding(int iteration, std::size_t dims);

// Forward-difference Jacobian: column j = (P(x0 + eps e_j) - P(x0)) / eps.
Tensor linearize(const Preconditioner& po, const Tensor& reference, int iteration, double eps);

// ln(1 + |p_ij|) entrywise.
Tensor log_magnitude(const Tensor& matrix);

}  // namespace dipa
