#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dipa/autodiff.hpp"
#include "dipa/tensor.hpp"

namespace dipa {

enum class Modality { mri, spc, sr };

std::string_view to_string(Modality modality);
Modality parse_modality(std::string_view name);

// Linear sensing operator A acting on real {h, w} images. Immutable after
// construction and safe to share across threads.
//
// Measurement layouts:
//   MRI  {2, m}        real and imaginary parts of the sampled unitary DFT
//                      coefficients, row-major over the mask
//   SPC  {m}           selected Hadamard rows (entries +-scale)
//   SR   {h/f, w/f}    circularly blurred image sampled every f pixels
class SensingOperator {
 public:
  // Column (phase-encode) undersampling with a fully sampled low-frequency
  // band of round(center_fraction * w) columns; the rest are drawn by
  // Gaussian-weighted sampling without replacement.
  static SensingOperator mri(std::size_t height, std::size_t width, double target_af, double center_fraction,
                             std::uint64_t seed);
  // Arbitrary k-space mask, row-major {h, w}, nonzero = sampled.
  static SensingOperator mri_from_mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> mask);
  // First round(gamma * n) sequency-ordered Hadamard rows of the flattened
  // image, multiplied by scale (scale = 1/sqrt(n) gives orthonormal rows).
  static SensingOperator spc(std::size_t height, std::size_t width, double gamma, double scale = 1.0,
                             std::uint64_t seed = 0);
  // Circular Gaussian blur (radius ceil(3 sigma), normalized to unit sum)
  // followed by keeping pixels 0, f, 2f, ... along each axis.
  static SensingOperator sr(std::size_t height, std::size_t width, std::size_t factor, double blur_sigma);

  Modality modality() const { return modality_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  Shape image_shape() const { return {height_, width_}; }
  std::size_t pixels() const { return height_ * width_; }
  // Number of measurements (complex samples for MRI).
  std::size_t measurements() const { return measurements_; }
  Shape measurement_shape() const;
  std::uint64_t seed() const { return seed_; }

  // h w / m for MRI; m / n for SPC; sqrt(n / m) for SR.
  double acceleration_factor() const;
  double compression_ratio() const;
  double resolution_factor() const;

  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const std::vector<std::size_t>& sequency_rows() const { return rows_; }
  const Tensor& blur_kernel() const { return kernel_; }
  double spc_scale() const { return spc_scale_; }
  std::size_t factor() const { return factor_; }
  double blur_sigma() const { return blur_sigma_; }

  std::string describe() const;

  Var apply(Var image) const;
  Var adjoint(Var measurement) const;
  // A^T (A x - y)
  Var data_grad(Var image, Var measurement) const;
  // A^T A x
  Var gram(Var image) const;
  // ||y - A x||^2
  Var data_fidelity(Var image, Var measurement) const;

  Tensor apply(const Tensor& image) const;
  Tensor adjoint(const Tensor& measurement) const;
  Tensor data_grad(const Tensor& image, const Tensor& measurement) const;
  Tensor gram(const Tensor& image) const;
  double data_fidelity(const Tensor& image, const Tensor& measurement) const;

  // Dense n x n A^T A built column by column from gram().
  Tensor gram_matrix() const;

 private:
  SensingOperator() = default;
  void check_image(const Shape& shape) const;
  void check_measurement(const Shape& shape) const;

  Modality modality_ = Modality::spc;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t measurements_ = 0;
  std::uint64_t seed_ = 0;

  // MRI
  std::vector<std::uint8_t> mask_;
  IndexList spectrum_indices_;
  // SPC
  std::vector<std::size_t> rows_;
  IndexList natural_rows_;
  double spc_scale_ = 1.0;
  // SR
  std::size_t factor_ = 1;
  double blur_sigma_ = 0.0;
  Tensor kernel_;
  IndexList decimation_;
};

struct Measurement {
  Tensor values;
  std::string operator_id;
  double noise_sigma = 0.0;

  // MRI measurements as separate real/imaginary planes.
  ComplexPair as_complex() const;
};

// A x plus i.i.d. N(0, sigma^2) noise on every real entry (real and
// imaginary parts independently for MRI). Deterministic given the seed.
Measurement simulate_measurement(const SensingOperator& op, const Tensor& image, double noise_sigma,
                                 std::uint64_t seed);

}  // namespace dipa
