#include "dipa/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dipa/random.hpp"
#include "dipa/transforms.hpp"

namespace dipa {

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::mri:
      return "mri";
    case Modality::spc:
      return "spc";
    case Modality::sr:
      return "sr";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "mri") return Modality::mri;
  if (name == "spc") return Modality::spc;
  if (name == "sr") return Modality::sr;
  throw std::invalid_argument("unknown modality '" + std::string(name) + "' (expected mri, spc or sr)");
}

namespace {

void require_shape(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw std::invalid_argument("image extents must be positive");
}

IndexList mri_spectrum_indices(const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> sampled;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) sampled.push_back(i);
  }
  std::vector<std::size_t> idx(sampled);
  idx.reserve(2 * sampled.size());
  for (std::size_t i : sampled) idx.push_back(mask.size() + i);
  return make_index_list(std::move(idx));
}

}  // namespace

SensingOperator SensingOperator::mri_from_mask(std::size_t height, std::size_t width,
                                               std::vector<std::uint8_t> mask) {
  require_shape(height, width);
  if (mask.size() != height * width) {
    throw std::invalid_argument("mri mask has " + std::to_string(mask.size()) + " entries, expected " +
                                std::to_string(height * width));
  }
  for (auto& v : mask) v = v ? 1 : 0;
  SensingOperator op;
  op.modality_ = Modality::mri;
  op.height_ = height;
  op.width_ = width;
  op.measurements_ = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (op.measurements_ == 0) throw std::invalid_argument("mri mask samples nothing");
  op.spectrum_indices_ = mri_spectrum_indices(mask);
  op.mask_ = std::move(mask);
  return op;
}

SensingOperator SensingOperator::mri(std::size_t height, std::size_t width, double target_af,
                                     double center_fraction, std::uint64_t seed) {
  require_shape(height, width);
  if (!(target_af >= 1.0) || target_af > static_cast<double>(height * width)) {
    throw std::invalid_argument("mri: target acceleration factor must lie in [1, h*w]");
  }
  if (!(center_fraction >= 0.0) || center_fraction >= 1.0) {
    throw std::invalid_argument("mri: center_fraction must lie in [0, 1)");
  }
  // Full columns, so AF = w / lines; ceil keeps the achieved AF at or just
  // below the target.
  const auto lines = static_cast<std::size_t>(std::ceil(static_cast<double>(width) / target_af - 1e-9));
  const auto center = static_cast<std::size_t>(std::lround(center_fraction * static_cast<double>(width)));
  if (lines == 0 || center > lines) {
    throw std::invalid_argument("mri: " + std::to_string(center) + " center columns cannot fit in " +
                                std::to_string(lines) + " sampled lines for AF " + std::to_string(target_af));
  }

  // Column s in fftshift order holds frequency s - w/2; it lives at
  // unshifted column (s + w - w/2) mod w.
  const std::size_t half = width / 2;
  auto unshifted = [&](std::size_t s) { return (s + width - half) % width; };
  std::vector<char> chosen(width, 0);
  const std::size_t start = half - center / 2;
  for (std::size_t s = start; s < start + center; ++s) chosen[s] = 1;

  const double sigma = static_cast<double>(width) / 6.0;
  Rng rng(seed);
  for (std::size_t picked = center; picked < lines; ++picked) {
    double total = 0.0;
    std::vector<double> weight(width, 0.0);
    for (std::size_t s = 0; s < width; ++s) {
      if (chosen[s]) continue;
      const double d = static_cast<double>(s) - static_cast<double>(half);
      weight[s] = std::exp(-d * d / (2.0 * sigma * sigma));
      total += weight[s];
    }
    double u = rng.uniform() * total;
    std::size_t pick = width;
    for (std::size_t s = 0; s < width; ++s) {
      if (chosen[s]) continue;
      pick = s;
      if (u < weight[s]) break;
      u -= weight[s];
    }
    chosen[pick] = 1;
  }

  std::vector<std::uint8_t> mask(height * width, 0);
  for (std::size_t s = 0; s < width; ++s) {
    if (!chosen[s]) continue;
    const std::size_t c = unshifted(s);
    for (std::size_t r = 0; r < height; ++r) mask[r * width + c] = 1;
  }
  SensingOperator op = mri_from_mask(height, width, std::move(mask));
  op.seed_ = seed;
  return op;
}

SensingOperator SensingOperator::spc(std::size_t height, std::size_t width, double gamma, double scale,
                                     std::uint64_t seed) {
  require_shape(height, width);
  const std::size_t n = height * width;
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("spc: pixel count " + std::to_string(n) + " is not a power of two");
  }
  if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("spc: gamma must lie in (0, 1]");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("spc: scale must be positive");
  const auto m = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n)));
  if (m == 0) throw std::invalid_argument("spc: gamma selects no rows");

  const auto order = sequency_order(n);
  SensingOperator op;
  op.modality_ = Modality::spc;
  op.height_ = height;
  op.width_ = width;
  op.measurements_ = m;
  op.seed_ = seed;
  op.spc_scale_ = scale;
  std::vector<std::size_t> natural(m);
  op.rows_.resize(m);
  for (std::size_t s = 0; s < m; ++s) {
    op.rows_[s] = s;
    natural[s] = order[s];
  }
  op.natural_rows_ = make_index_list(std::move(natural));
  return op;
}

SensingOperator SensingOperator::sr(std::size_t height, std::size_t width, std::size_t factor, double blur_sigma) {
  require_shape(height, width);
  if (factor == 0 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument("sr: factor " + std::to_string(factor) + " must divide " + std::to_string(height) +
                                "x" + std::to_string(width));
  }
  if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw std::invalid_argument("sr: blur_sigma must be >= 0");

  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * blur_sigma));
  const std::size_t k = 2 * radius + 1;
  Tensor kernel({k, k});
  if (radius == 0) {
    kernel[0] = 1.0;
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double di = static_cast<double>(i) - static_cast<double>(radius);
        const double dj = static_cast<double>(j) - static_cast<double>(radius);
        const double v = std::exp(-(di * di + dj * dj) / (2.0 * blur_sigma * blur_sigma));
        kernel.at(i, j) = v;
        total += v;
      }
    }
    for (double& v : kernel.data()) v /= total;
  }

  SensingOperator op;
  op.modality_ = Modality::sr;
  op.height_ = height;
  op.width_ = width;
  op.factor_ = factor;
  op.blur_sigma_ = blur_sigma;
  op.kernel_ = std::move(kernel);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < height; r += factor) {
    for (std::size_t c = 0; c < width; c += factor) keep.push_back(r * width + c);
  }
  op.measurements_ = keep.size();
  op.decimation_ = make_index_list(std::move(keep));
  return op;
}

Shape SensingOperator::measurement_shape() const {
  switch (modality_) {
    case Modality::mri:
      return {2, measurements_};
    case Modality::spc:
      return {measurements_};
    case Modality::sr:
      return {height_ / factor_, width_ / factor_};
  }
  return {};
}

double SensingOperator::acceleration_factor() const {
  return static_cast<double>(pixels()) / static_cast<double>(measurements_);
}

double SensingOperator::compression_ratio() const {
  return static_cast<double>(measurements_) / static_cast<double>(pixels());
}

double SensingOperator::resolution_factor() const { return std::sqrt(acceleration_factor()); }

std::string SensingOperator::describe() const {
  std::ostringstream os;
  os << to_string(modality_) << "(" << height_ << "x" << width_ << ", m=" << measurements_;
  switch (modality_) {
    case Modality::mri:
      os << ", af=" << acceleration_factor() << ", seed=" << seed_;
      break;
    case Modality::spc:
      os << ", gamma=" << compression_ratio() << ", scale=" << spc_scale_;
      break;
    case Modality::sr:
      os << ", factor=" << factor_ << ", sigma=" << blur_sigma_;
      break;
  }
  os << ")";
  return os.str();
}

void SensingOperator::check_image(const Shape& shape) const {
  if (shape != image_shape()) {
    throw std::invalid_argument(describe() + ": image shape " + shape_string(shape) + " does not match " +
                                shape_string(image_shape()));
  }
}

void SensingOperator::check_measurement(const Shape& shape) const {
  if (numel(shape) != numel(measurement_shape())) {
    throw std::invalid_argument(describe() + ": measurement shape " + shape_string(shape) + " does not match " +
                                shape_string(measurement_shape()));
  }
}

Var SensingOperator::apply(Var image) const {
  check_image(image.shape());
  switch (modality_) {
    case Modality::mri:
      return gather(dft2(image), spectrum_indices_, measurement_shape());
    case Modality::spc: {
      Var coeffs = fwht(reshape(image, {pixels()}));
      Var picked = gather(coeffs, natural_rows_, measurement_shape());
      return spc_scale_ == 1.0 ? picked : scale(picked, spc_scale_);
    }
    case Modality::sr:
      return gather(circular_conv2d(image, kernel_), decimation_, measurement_shape());
  }
  throw std::logic_error("unhandled modality");
}

Var SensingOperator::adjoint(Var measurement) const {
  check_measurement(measurement.shape());
  switch (modality_) {
    case Modality::mri:
      return idft2_real(scatter(measurement, spectrum_indices_, {2, height_, width_}));
    case Modality::spc: {
      Var full = scatter(measurement, natural_rows_, {pixels()});
      Var back = reshape(fwht(full), image_shape());
      return spc_scale_ == 1.0 ? back : scale(back, spc_scale_);
    }
    case Modality::sr:
      // The kernel is symmetric, so correlation and convolution coincide.
      return circular_conv2d(scatter(measurement, decimation_, image_shape()), kernel_);
  }
  throw std::logic_error("unhandled modality");
}

Var SensingOperator::data_grad(Var image, Var measurement) const {
  return adjoint(sub(apply(image), measurement));
}

Var SensingOperator::gram(Var image) const { return adjoint(apply(image)); }

Var SensingOperator::data_fidelity(Var image, Var measurement) const {
  return sum_squares(sub(apply(image), measurement));
}

Tensor SensingOperator::apply(const Tensor& image) const {
  Tape tape;
  return apply(tape.constant(image)).value();
}

Tensor SensingOperator::adjoint(const Tensor& measurement) const {
  Tape tape;
  return adjoint(tape.constant(measurement)).value();
}

Tensor SensingOperator::data_grad(const Tensor& image, const Tensor& measurement) const {
  Tape tape;
  return data_grad(tape.constant(image), tape.constant(measurement)).value();
}

Tensor SensingOperator::gram(const Tensor& image) const {
  Tape tape;
  return gram(tape.constant(image)).value();
}

double SensingOperator::data_fidelity(const Tensor& image, const Tensor& measurement) const {
  Tape tape;
  return data_fidelity(tape.constant(image), tape.constant(measurement)).value().item();
}

Tensor SensingOperator::gram_matrix() const {
  const std::size_t n = pixels();
  Tensor out({n, n});
  Tensor basis(image_shape());
  for (std::size_t j = 0; j < n; ++j) {
    basis[j] = 1.0;
    const Tensor col = gram(basis);
    basis[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) out.at(i, j) = col[i];
  }
  return out;
}

ComplexPair Measurement::as_complex() const { return ComplexPair::unstack(values); }

Measurement simulate_measurement(const SensingOperator& op, const Tensor& image, double noise_sigma,
                                 std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  Measurement m;
  m.values = op.apply(image);
  m.operator_id = op.describe();
  m.noise_sigma = noise_sigma;
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (double& v : m.values.data()) v += noise_sigma * rng.normal();
  }
  return m;
}

}  // namespace dipa
