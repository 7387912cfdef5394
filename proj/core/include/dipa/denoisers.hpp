#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "dipa/tape.hpp"
#include "dipa/tensor.hpp"

namespace dipa {

enum class DenoiserKind { identity, dct_soft_threshold };

std::string_view to_string(DenoiserKind kind);
DenoiserKind parse_denoiser_kind(std::string_view name);

// Nonexpansive denoiser D. The DCT kind soft-thresholds orthonormal DCT
// coefficients by sigma, optionally leaving the DC coefficient untouched.
struct Denoiser {
  DenoiserKind kind = DenoiserKind::dct_soft_threshold;
  double sigma = 0.01;
  bool preserve_dc = true;

  static Denoiser identity() { return {DenoiserKind::identity, 0.0, true}; }
  static Denoiser dct(double sigma, bool preserve_dc = true) {
    return {DenoiserKind::dct_soft_threshold, sigma, preserve_dc};
  }

  Var denoise(Var image) const;
  // x - D(x), the RED gradient direction.
  Var red_residual(Var image) const;

  Tensor denoise(const Tensor& image) const;
  Tensor red_residual(const Tensor& image) const;
};

// Largest ||D(x) - D(z)|| / ||x - z|| over seeded random pairs of the given
// shape. Pairs with x == z are skipped.
double verify_bounded(const Denoiser& denoiser, const Shape& shape, std::size_t trials, std::uint64_t seed);

}  // namespace dipa
