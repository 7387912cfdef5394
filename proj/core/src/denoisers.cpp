#include "dipa/denoisers.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dipa/autodiff.hpp"
#include "dipa/random.hpp"
#include "dipa/transforms.hpp"

namespace dipa {

std::string_view to_string(DenoiserKind kind) {
  return kind == DenoiserKind::identity ? "identity" : "dct_soft_threshold";
}

DenoiserKind parse_denoiser_kind(std::string_view name) {
  if (name == "identity") return DenoiserKind::identity;
  if (name == "dct_soft_threshold") return DenoiserKind::dct_soft_threshold;
  throw std::invalid_argument("unknown denoiser kind '" + std::string(name) +
                              "' (expected identity or dct_soft_threshold)");
}

Var Denoiser::denoise(Var image) const {
  if (kind == DenoiserKind::identity) return image;
  if (!(sigma >= 0.0)) throw std::invalid_argument("denoiser sigma must be >= 0");
  static const IndexList dc = make_index_list({0});
  return idct2(soft_threshold(dct2(image), sigma, preserve_dc ? dc : nullptr));
}

Var Denoiser::red_residual(Var image) const { return sub(image, denoise(image)); }

Tensor Denoiser::denoise(const Tensor& image) const {
  Tape tape;
  return denoise(tape.constant(image)).value();
}

Tensor Denoiser::red_residual(const Tensor& image) const {
  Tape tape;
  return red_residual(tape.constant(image)).value();
}

double verify_bounded(const Denoiser& denoiser, const Shape& shape, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("verify_bounded: trials must be >= 1");
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    // Mix of scales so that both thresholded and surviving coefficients occur.
    const double spread = t % 2 == 0 ? 1.0 : 4.0 * std::max(denoiser.sigma, 1e-3);
    const Tensor x = rng.uniform_tensor(shape, 0.0, 1.0);
    Tensor z = x;
    for (double& v : z.data()) v += spread * rng.normal();
    const double gap = norm(x - z);
    if (gap == 0.0) continue;
    const double ratio = norm(denoiser.denoise(x) - denoiser.denoise(z)) / gap;
    worst = std::max(worst, ratio);
  }
  return worst;
}

}  // namespace dipa
