#include "dipa/transforms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dipa {

using cd = std::complex<double>;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

void fft_radix2(std::span<cd> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles from direct evaluation keep round-off independent of len.
      const cd w = std::polar(1.0, ang * static_cast<double>(k));
      for (std::size_t i = 0; i < n; i += len) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

void fft_bluestein(std::span<cd> a, bool inverse) {
  const std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<cd> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    y[k] = std::conj(chirp[k]);
    y[m - k] = std::conj(chirp[k]);
  }
  fft_radix2(x, false);
  fft_radix2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_radix2(x, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.shape()[0] == 0 || t.shape()[1] == 0) {
    throw std::invalid_argument(std::string(what) + ": expected a non-empty {h, w} tensor, got " +
                                shape_string(t.shape()));
  }
}

// Applies a 1-D complex transform along both axes of an h x w array.
template <class Fn>
void along_both_axes(std::vector<cd>& values, std::size_t h, std::size_t w, Fn&& transform) {
  std::vector<cd> line(std::max(h, w));
  for (std::size_t r = 0; r < h; ++r) {
    std::span<cd> row(values.data() + r * w, w);
    transform(row);
  }
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = values[r * w + c];
    transform(std::span<cd>(line.data(), h));
    for (std::size_t r = 0; r < h; ++r) values[r * w + c] = line[r];
  }
}

std::vector<cd> unitary_dft2(std::vector<cd> values, std::size_t h, std::size_t w, bool inverse) {
  along_both_axes(values, h, w, [inverse](std::span<cd> line) { fft(line, inverse); });
  const double s = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (cd& v : values) v *= s;
  return values;
}

ComplexPair split(const std::vector<cd>& values, const Shape& shape) {
  Tensor re(shape), im(shape);
  for (std::size_t i = 0; i < values.size(); ++i) {
    re[i] = values[i].real();
    im[i] = values[i].imag();
  }
  return {std::move(re), std::move(im)};
}

// Orthonormal DCT-II of one line via a length-n complex FFT of the
// even/odd-reordered sequence.
void dct_line(std::span<double> x, std::vector<cd>& buf) {
  const std::size_t n = x.size();
  buf.assign(n, cd{});
  for (std::size_t k = 0; 2 * k < n; ++k) buf[k] = x[2 * k];
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) buf[n - 1 - k] = x[2 * k + 1];
  fft(buf, false);
  const double nn = static_cast<double>(n);
  const double s0 = std::sqrt(1.0 / nn);
  const double s1 = std::sqrt(2.0 / nn);
  for (std::size_t k = 0; k < n; ++k) {
    const cd tw = std::polar(1.0, -std::numbers::pi * static_cast<double>(k) / (2.0 * nn));
    x[k] = (buf[k] * tw).real() * (k == 0 ? s0 : s1);
  }
}

void idct_line(std::span<double> x, std::vector<cd>& buf) {
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  const double s0 = std::sqrt(1.0 / nn);
  const double s1 = std::sqrt(2.0 / nn);
  auto unscaled = [&](std::size_t k) { return x[k] / (k == 0 ? s0 : s1); };
  buf.assign(n, cd{});
  for (std::size_t k = 0; k < n; ++k) {
    // V_k = exp(i pi k / 2n) (C_k - i C_{n-k}), with C_n = 0.
    const double paired = k == 0 ? 0.0 : unscaled(n - k);
    const cd tw = std::polar(1.0, std::numbers::pi * static_cast<double>(k) / (2.0 * nn));
    buf[k] = tw * cd(unscaled(k), -paired);
  }
  fft(buf, true);
  for (cd& v : buf) v /= nn;
  for (std::size_t k = 0; 2 * k < n; ++k) x[2 * k] = buf[k].real();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) x[2 * k + 1] = buf[n - 1 - k].real();
}

template <class LineFn>
Tensor separable_real(const Tensor& image, LineFn&& fn) {
  const std::size_t h = image.shape()[0];
  const std::size_t w = image.shape()[1];
  Tensor out = image;
  std::vector<cd> buf;
  std::vector<double> line(h);
  for (std::size_t r = 0; r < h; ++r) fn(out.data().subspan(r * w, w), buf);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) line[r] = out[r * w + c];
    fn(std::span<double>(line), buf);
    for (std::size_t r = 0; r < h; ++r) out[r * w + c] = line[r];
  }
  return out;
}

}  // namespace

void fft(std::span<cd> data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    fft_radix2(data, inverse);
  } else {
    fft_bluestein(data, inverse);
  }
}

ComplexPair dft2(const Tensor& image) {
  require_image(image, "dft2");
  std::vector<cd> values(image.data().begin(), image.data().end());
  return split(unitary_dft2(std::move(values), image.shape()[0], image.shape()[1], false), image.shape());
}

ComplexPair dft2(const ComplexPair& signal) {
  require_image(signal.real, "dft2");
  if (signal.real.shape() != signal.imag.shape()) throw std::invalid_argument("dft2: real/imag shape mismatch");
  std::vector<cd> values(signal.real.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = cd(signal.real[i], signal.imag[i]);
  return split(unitary_dft2(std::move(values), signal.shape()[0], signal.shape()[1], false), signal.shape());
}

ComplexPair idft2_complex(const ComplexPair& spectrum) {
  require_image(spectrum.real, "idft2");
  if (spectrum.real.shape() != spectrum.imag.shape()) {
    throw std::invalid_argument("idft2: real/imag shape mismatch " + shape_string(spectrum.real.shape()) + " vs " +
                                shape_string(spectrum.imag.shape()));
  }
  std::vector<cd> values(spectrum.real.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = cd(spectrum.real[i], spectrum.imag[i]);
  return split(unitary_dft2(std::move(values), spectrum.shape()[0], spectrum.shape()[1], true), spectrum.shape());
}

Tensor idft2(const ComplexPair& spectrum) { return idft2_complex(spectrum).real; }

Tensor fwht(const Tensor& x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("fwht: length " + std::to_string(n) + " is not a power of two");
  }
  Tensor out = x;
  double* a = out.data().data();
  for (std::size_t len = 1; len < n; len <<= 1) {
    for (std::size_t i = 0; i < n; i += 2 * len) {
      for (std::size_t j = i; j < i + len; ++j) {
        const double u = a[j];
        const double v = a[j + len];
        a[j] = u + v;
        a[j + len] = u - v;
      }
    }
  }
  return out;
}

std::vector<std::size_t> sequency_order(std::size_t n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("sequency_order: length " + std::to_string(n) + " is not a power of two");
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  std::vector<std::size_t> order(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t gray = s ^ (s >> 1);
    std::size_t rev = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (gray & (std::size_t{1} << b)) rev |= std::size_t{1} << (bits - 1 - b);
    }
    order[s] = rev;
  }
  return order;
}

Tensor dct2(const Tensor& image) {
  require_image(image, "dct2");
  return separable_real(image, [](std::span<double> line, std::vector<cd>& buf) { dct_line(line, buf); });
}

Tensor idct2(const Tensor& coefficients) {
  require_image(coefficients, "idct2");
  return separable_real(coefficients, [](std::span<double> line, std::vector<cd>& buf) { idct_line(line, buf); });
}

namespace {
using Inputs = std::span<const Tensor* const>;
using GradInputs = std::span<Tensor* const>;

void accumulate(Tensor* target, const Tensor& g) {
  if (target == nullptr) return;
  for (std::size_t i = 0; i < g.size(); ++i) (*target)[i] += g[i];
}
}  // namespace

Var dft2(Var image) {
  require_image(image.value(), "dft2");
  return image.tape().record(
      "dft2", {image}, [](Inputs in) { return dft2(*in[0]).stacked(); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], idft2(ComplexPair::unstack(g))); });
}

Var idft2_real(Var spectrum) {
  const Shape& s = spectrum.shape();
  if (s.size() != 3 || s[0] != 2) {
    throw std::invalid_argument("idft2_real: expected {2, h, w} spectrum, got " + shape_string(s));
  }
  return spectrum.tape().record(
      "idft2_real", {spectrum}, [](Inputs in) { return idft2(ComplexPair::unstack(*in[0])); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], dft2(g).stacked()); });
}

Var fwht(Var x) {
  if (!is_power_of_two(x.size())) {
    throw std::invalid_argument("fwht: length " + std::to_string(x.size()) + " is not a power of two");
  }
  return x.tape().record(
      "fwht", {x}, [](Inputs in) { return fwht(*in[0]); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], fwht(g)); });
}

Var dct2(Var image) {
  require_image(image.value(), "dct2");
  return image.tape().record(
      "dct2", {image}, [](Inputs in) { return dct2(*in[0]); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], idct2(g)); });
}

Var idct2(Var coefficients) {
  require_image(coefficients.value(), "idct2");
  return coefficients.tape().record(
      "idct2", {coefficients}, [](Inputs in) { return idct2(*in[0]); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], dct2(g)); });
}

}  // namespace dipa
