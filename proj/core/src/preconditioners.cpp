#include "dipa/preconditioners.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dipa/autodiff.hpp"
#include "dipa/random.hpp"

namespace dipa {

Var Preconditioner::apply(Var gradient, int iteration, std::span<const Var> params) const {
  if (iteration < 1) {
    throw std::invalid_argument(std::string(kind()) + " preconditioner: iteration " + std::to_string(iteration) +
                                " out of range (must be >= 1)");
  }
  if (params.size() != params_.size()) {
    throw std::invalid_argument(std::string(kind()) + " preconditioner: expected " +
                                std::to_string(params_.size()) + " bound parameters, got " +
                                std::to_string(params.size()));
  }
  return do_apply(gradient, iteration, params);
}

Tensor Preconditioner::apply(const Tensor& gradient, int iteration) const {
  Tape tape;
  const auto params = bind(tape, false);
  return apply(tape.constant(gradient), iteration, params).value();
}

std::vector<Var> Preconditioner::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const Tensor& p : params_) vars.push_back(trainable ? tape.leaf(p) : tape.constant(p));
  return vars;
}

std::size_t Preconditioner::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

std::vector<double> Preconditioner::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const Tensor& p : params_) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

void Preconditioner::load_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw std::invalid_argument(std::string(kind()) + " preconditioner holds " + std::to_string(parameter_count()) +
                                " parameters, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (Tensor& p : params_) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
              values.begin() + static_cast<std::ptrdiff_t>(offset + p.size()), p.data().begin());
    offset += p.size();
  }
}

std::unique_ptr<Preconditioner> IdentityPreconditioner::clone() const {
  return std::make_unique<IdentityPreconditioner>(*this);
}

// ---------------------------------------------------------------------------
// Ridge Hessian

struct RidgeHessianPreconditioner::Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;

  Tensor solve(const Tensor& rhs) const {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data().data(), static_cast<Eigen::Index>(rhs.size()));
    Eigen::VectorXd z = llt.solve(b);
    Tensor out(rhs.shape());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i];
    return out;
  }
};

RidgeHessianPreconditioner::RidgeHessianPreconditioner(const SensingOperator& op, double eta) : eta_(eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("ridge_hessian: eta must be >= 0");
  const std::size_t n = op.pixels();
  if (n > kMaxPixels) {
    throw std::invalid_argument("ridge_hessian: " + std::to_string(n) + " pixels exceeds the dense limit of " +
                                std::to_string(kMaxPixels));
  }
  system_ = op.gram_matrix();
  for (std::size_t i = 0; i < n; ++i) system_.at(i, i) += eta;

  Eigen::MatrixXd dense(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // Symmetrize away round-off from the column-wise Gram build.
      dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * (system_.at(i, j) + system_.at(j, i));
    }
  }
  auto factor = std::make_shared<Factor>();
  factor->llt.compute(dense);
  bool singular = factor->llt.info() != Eigen::Success;
  if (!singular) {
    const Eigen::VectorXd diag = factor->llt.matrixLLT().diagonal();
    const double lo = diag.minCoeff();
    const double hi = diag.maxCoeff();
    singular = !(lo > 0.0) || (lo * lo) < 1e-10 * (hi * hi);
  }
  if (singular) {
    throw std::runtime_error("ridge_hessian: A^T A + eta I is singular (eta = " + std::to_string(eta) +
                             "); use eta > 0 for rank-deficient operators");
  }
  factor_ = std::move(factor);
}

std::unique_ptr<Preconditioner> RidgeHessianPreconditioner::clone() const {
  return std::make_unique<RidgeHessianPreconditioner>(*this);
}

Var RidgeHessianPreconditioner::do_apply(Var gradient, int, std::span<const Var>) const {
  if (gradient.size() != system_.shape()[0]) {
    throw std::invalid_argument("ridge_hessian: gradient of shape " + shape_string(gradient.shape()) +
                                " does not match n = " + std::to_string(system_.shape()[0]));
  }
  auto factor = factor_;
  // The system matrix is symmetric, so the backward pass solves it again.
  return gradient.tape().record(
      "ridge_solve", {gradient}, [factor](std::span<const Tensor* const> in) { return factor->solve(*in[0]); },
      [factor](std::span<const Tensor* const>, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        const Tensor z = factor->solve(g);
        for (std::size_t i = 0; i < z.size(); ++i) (*gi[0])[i] += z[i];
      });
}

// ---------------------------------------------------------------------------
// Polynomial

PolynomialPreconditioner::PolynomialPreconditioner(const SensingOperator& op, std::vector<double> coefficients)
    : op_(op), coefficients_(std::move(coefficients)) {
  if (coefficients_.empty()) throw std::invalid_argument("polynomial: at least one coefficient required");
}

std::unique_ptr<Preconditioner> PolynomialPreconditioner::clone() const {
  return std::make_unique<PolynomialPreconditioner>(*this);
}

Var PolynomialPreconditioner::do_apply(Var gradient, int, std::span<const Var>) const {
  const std::size_t d = coefficients_.size() - 1;
  Var acc = scale(gradient, coefficients_[d]);
  for (std::size_t i = d; i-- > 0;) acc = add(op_.gram(acc), scale(gradient, coefficients_[i]));
  return acc;
}

std::vector<double> neumann_coefficients(std::size_t degree, double step) {
  std::vector<double> c(degree + 1, 0.0);
  for (std::size_t i = 0; i <= degree; ++i) {
    double binom = 1.0;  // C(i, j)
    for (std::size_t j = 0; j <= i; ++j) {
      c[j] += step * binom * std::pow(-step, static_cast<double>(j));
      binom = binom * static_cast<double>(i - j) / static_cast<double>(j + 1);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Linear

LinearPreconditioner::LinearPreconditioner(std::size_t pixels) {
  if (pixels == 0) throw std::invalid_argument("linear preconditioner: n must be positive");
  params_.push_back(Tensor::identity(pixels));
}

LinearPreconditioner::LinearPreconditioner(Tensor matrix) {
  if (matrix.rank() != 2 || matrix.shape()[0] != matrix.shape()[1] || matrix.empty()) {
    throw std::invalid_argument("linear preconditioner: matrix must be square, got " + shape_string(matrix.shape()));
  }
  params_.push_back(std::move(matrix));
}

std::unique_ptr<Preconditioner> LinearPreconditioner::clone() const {
  return std::make_unique<LinearPreconditioner>(*this);
}

Var LinearPreconditioner::do_apply(Var gradient, int, std::span<const Var> params) const {
  if (gradient.size() != pixels()) {
    throw std::invalid_argument("linear preconditioner: gradient of shape " + shape_string(gradient.shape()) +
                                " does not match n = " + std::to_string(pixels()));
  }
  return matvec(params[0], gradient);
}

// ---------------------------------------------------------------------------
// Nonlinear

namespace {

// Parameter layout: lift_w, lift_b, blocks x (dw_k, dw_b, pw1_w, pw1_b,
// pw2_w, pw2_b), enc_w, proj_w, proj_b.
std::vector<Tensor> nonlinear_layout(const NonlinearConfig& c) {
  const std::size_t f = c.features;
  const std::size_t hidden = f * c.expansion;
  std::vector<Tensor> p;
  p.emplace_back(Shape{f, 1});
  p.emplace_back(Shape{f});
  for (std::size_t b = 0; b < c.blocks; ++b) {
    p.emplace_back(Shape{f, c.kernel_size, c.kernel_size});
    p.emplace_back(Shape{f});
    p.emplace_back(Shape{hidden, f});
    p.emplace_back(Shape{hidden});
    p.emplace_back(Shape{f, hidden});
    p.emplace_back(Shape{f});
  }
  p.emplace_back(Shape{f, c.encoding_dims});
  p.emplace_back(Shape{1, f});
  p.emplace_back(Shape{1});
  return p;
}

void validate(const NonlinearConfig& c, std::size_t height, std::size_t width) {
  if (c.blocks == 0 || c.features == 0 || c.expansion == 0) {
    throw std::invalid_argument("nonlinear preconditioner: blocks, features and expansion must be positive");
  }
  if (c.kernel_size % 2 == 0) throw std::invalid_argument("nonlinear preconditioner: kernel_size must be odd");
  if (c.encoding_dims == 0 || c.encoding_dims % 2 != 0) {
    throw std::invalid_argument("nonlinear preconditioner: encoding_dims must be even and positive");
  }
  if (height == 0 || width == 0) throw std::invalid_argument("nonlinear preconditioner: empty image shape");
}

}  // namespace

NonlinearPreconditioner::NonlinearPreconditioner(const NonlinearConfig& config, std::size_t height,
                                                 std::size_t width)
    : config_(config), height_(height), width_(width) {
  validate(config_, height, width);
  params_ = nonlinear_layout(config_);
  const std::size_t n = height * width;
  if (parameter_count() >= n * n) {
    throw std::invalid_argument("nonlinear preconditioner: " + std::to_string(parameter_count()) +
                                " parameters is not smaller than the dense matrix (" + std::to_string(n * n) +
                                "); reduce features or blocks");
  }

  Rng rng(config_.seed);
  const double f = static_cast<double>(config_.features);
  const double hidden = f * static_cast<double>(config_.expansion);
  const double taps = static_cast<double>(config_.kernel_size * config_.kernel_size);
  std::size_t i = 0;
  params_[i++] = rng.normal_tensor(params_[0].shape(), 1.0);
  ++i;  // lift bias stays zero
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    params_[i] = rng.normal_tensor(params_[i].shape(), 1.0 / std::sqrt(taps));
    i += 2;
    params_[i] = rng.normal_tensor(params_[i].shape(), 1.0 / std::sqrt(f));
    i += 2;
    params_[i] = rng.normal_tensor(params_[i].shape(), 0.5 / std::sqrt(hidden));
    i += 2;
  }
  params_[i] = rng.normal_tensor(params_[i].shape(), 0.1 / std::sqrt(static_cast<double>(config_.encoding_dims)));
  // Projection weights and bias remain zero: identity at initialization.
}

NonlinearPreconditioner NonlinearPreconditioner::zero(const NonlinearConfig& config, std::size_t height,
                                                      std::size_t width) {
  NonlinearPreconditioner po(config, height, width);
  for (Tensor& p : po.params_) p.fill(0.0);
  return po;
}

NonlinearPreconditioner NonlinearPreconditioner::randomized(const NonlinearConfig& config, std::size_t height,
                                                            std::size_t width) {
  NonlinearPreconditioner po(config, height, width);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t last = po.params_.size();
  po.params_[last - 2] = rng.normal_tensor(po.params_[last - 2].shape(),
                                           1.0 / std::sqrt(static_cast<double>(config.features)));
  po.params_[last - 1] = rng.normal_tensor(po.params_[last - 1].shape(), 0.1);
  return po;
}

std::unique_ptr<Preconditioner> NonlinearPreconditioner::clone() const {
  return std::make_unique<NonlinearPreconditioner>(*this);
}

Var NonlinearPreconditioner::do_apply(Var gradient, int iteration, std::span<const Var> params) const {
  if (gradient.size() != height_ * width_) {
    throw std::invalid_argument("nonlinear preconditioner: gradient of shape " + shape_string(gradient.shape()) +
                                " does not match " + std::to_string(height_) + "x" + std::to_string(width_));
  }
  Tape& tape = gradient.tape();
  const Var phi = tape.constant(positional_encoding(iteration, config_.encoding_dims));

  const std::size_t encoding = 2 + 6 * config_.blocks;
  Var features = channel_mix(params[0], reshape(gradient, {1, height_, width_}), params[1]);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::size_t i = 2 + 6 * b;
    Var spatial = depthwise_conv2d(features, params[i], params[i + 1]);
    Var expanded = silu(channel_mix(params[i + 2], spatial, params[i + 3]));
    features = add(features, channel_mix(params[i + 4], expanded, params[i + 5]));
    if (b == 0) features = add_channel_bias(features, matvec(params[encoding], phi));
  }
  Var correction = channel_mix(params[encoding + 1], features, params[encoding + 2]);
  return add(gradient, reshape(correction, gradient.shape()));
}

// ---------------------------------------------------------------------------

Tensor positional_encoding(int iteration, std::size_t dims) {
  if (dims == 0 || dims % 2 != 0) {
    throw std::invalid_argument("positional_encoding: dims must be even and positive, got " + std::to_string(dims));
  }
  if (iteration < 0) throw std::invalid_argument("positional_encoding: iteration must be >= 0");
  Tensor out({dims});
  const double k = static_cast<double>(iteration);
  for (std::size_t i = 0; i < dims / 2; ++i) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dims));
    out[2 * i] = std::sin(k / freq);
    out[2 * i + 1] = std::cos(k / freq);
  }
  return out;
}

Tensor linearize(const Preconditioner& po, const Tensor& reference, int iteration, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("linearize: eps must be positive");
  const Tensor base = po.apply(reference, iteration);
  if (!base.all_finite()) throw std::runtime_error("linearize: non-finite output at the reference point");
  const std::size_t n = reference.size();
  Tensor jac({base.size(), n});
  Tensor probe = reference;
  for (std::size_t j = 0; j < n; ++j) {
    probe[j] = reference[j] + eps;
    const Tensor out = po.apply(probe, iteration);
    probe[j] = reference[j];
    if (!out.all_finite()) throw std::runtime_error("linearize: non-finite output in column " + std::to_string(j));
    for (std::size_t i = 0; i < base.size(); ++i) jac.at(i, j) = (out[i] - base[i]) / eps;
  }
  return jac;
}

Tensor log_magnitude(const Tensor& matrix) {
  if (matrix.rank() != 2 || matrix.shape()[0] != matrix.shape()[1]) {
    throw std::invalid_argument("log_magnitude: expected a square matrix, got " + shape_string(matrix.shape()));
  }
  Tensor out = matrix;
  for (double& v : out.data()) v = std::log1p(std::abs(v));
  return out;
}

}  // namespace dipa
