#pragma once

// Reference computations written independently of the library: dense
// matrices built from closed-form definitions and straight-line solver loops.

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "dipa/operators.hpp"
#include "dipa/tensor.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Vector = std::vector<double>;

inline Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, Vector(c, 0.0)); }

inline Vector mul(const Matrix& a, const Vector& x) {
  Vector y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  }
  return y;
}

inline Vector mul_t(const Matrix& a, const Vector& y) {
  Vector x(a.empty() ? 0 : a[0].size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += a[i][j] * y[i];
  }
  return x;
}

inline Vector flat(const dipa::Tensor& t) { return t.vector(); }

inline dipa::Tensor tensor(const Vector& v, dipa::Shape shape) { return dipa::Tensor(std::move(shape), v); }

inline double max_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Sylvester Hadamard matrix, natural order.
inline Matrix hadamard(std::size_t n) {
  Matrix h = {{1.0}};
  while (h.size() < n) {
    const std::size_t m = h.size();
    Matrix next = zeros(2 * m, 2 * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        next[i][j] = h[i][j];
        next[i][j + m] = h[i][j];
        next[i + m][j] = h[i][j];
        next[i + m][j + m] = -h[i][j];
      }
    }
    h = std::move(next);
  }
  return h;
}

inline std::size_t sign_changes(const Vector& row) {
  std::size_t c = 0;
  for (std::size_t j = 1; j < row.size(); ++j) c += (row[j] != row[j - 1]);
  return c;
}

// Hadamard rows sorted by their number of sign changes.
inline Matrix hadamard_sequency(std::size_t n) {
  const Matrix h = hadamard(n);
  Matrix out(n);
  for (const auto& row : h) out[sign_changes(row)] = row;
  return out;
}

// Orthonormal DCT-II matrix of length n.
inline Matrix dct_matrix(std::size_t n) {
  Matrix c = zeros(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t j = 0; j < n; ++j) {
      c[k][j] = s * std::cos(std::numbers::pi * (2.0 * j + 1.0) * k / (2.0 * n));
    }
  }
  return c;
}

// 2-D separable DCT of a row-major h x w image.
inline Vector dct2(const Vector& x, std::size_t h, std::size_t w, bool inverse = false) {
  const Matrix ch = dct_matrix(h);
  const Matrix cw = dct_matrix(w);
  Vector out(h * w, 0.0);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      double s = 0.0;
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          s += (inverse ? ch[r][u] * cw[c][v] : ch[u][r] * cw[v][c]) * x[r * w + c];
        }
      }
      out[u * w + v] = s;
    }
  }
  return out;
}

// Unitary 2-D DFT entry for frequency (u, v) and pixel (r, c).
inline std::complex<double> dft_entry(std::size_t h, std::size_t w, std::size_t u, std::size_t v, std::size_t r,
                                      std::size_t c) {
  const double phase = -2.0 * std::numbers::pi * (static_cast<double>(u * r) / h + static_cast<double>(v * c) / w);
  return std::polar(1.0 / std::sqrt(static_cast<double>(h * w)), phase);
}

// Dense real matrix of the MRI operator: first m rows real parts, next m
// imaginary parts, samples in row-major mask order.
inline Matrix mri_matrix(std::size_t h, std::size_t w, const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> sampled;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (mask[i]) sampled.push_back(i);
  }
  const std::size_t m = sampled.size();
  Matrix a = zeros(2 * m, h * w);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t u = sampled[s] / w, v = sampled[s] % w;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const auto e = dft_entry(h, w, u, v, r, c);
        a[s][r * w + c] = e.real();
        a[m + s][r * w + c] = e.imag();
      }
    }
  }
  return a;
}

inline Matrix spc_matrix(std::size_t n, std::size_t m, double scale) {
  const Matrix hs = hadamard_sequency(n);
  Matrix a(hs.begin(), hs.begin() + static_cast<std::ptrdiff_t>(m));
  for (auto& row : a) {
    for (double& v : row) v *= scale;
  }
  return a;
}

// Circular Gaussian blur (radius ceil(3 sigma), unit sum) then decimation.
inline Matrix sr_matrix(std::size_t h, std::size_t w, std::size_t f, double sigma) {
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    for (long j = -radius; j <= radius; ++j) total += std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
  }
  const std::size_t mh = h / f, mw = w / f;
  Matrix a = zeros(mh * mw, h * w);
  for (std::size_t p = 0; p < mh; ++p) {
    for (std::size_t q = 0; q < mw; ++q) {
      const long r = static_cast<long>(p * f), c = static_cast<long>(q * f);
      for (long i = -radius; i <= radius; ++i) {
        for (long j = -radius; j <= radius; ++j) {
          const long rr = ((r + i) % static_cast<long>(h) + static_cast<long>(h)) % static_cast<long>(h);
          const long cc = ((c + j) % static_cast<long>(w) + static_cast<long>(w)) % static_cast<long>(w);
          a[p * mw + q][static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)] +=
              std::exp(-(i * i + j * j) / (2.0 * sigma * sigma)) / total;
        }
      }
    }
  }
  return a;
}

// Dense matrix of an operator from its closed-form definition.
inline Matrix dense(const dipa::SensingOperator& op) {
  switch (op.modality()) {
    case dipa::Modality::mri:
      return mri_matrix(op.height(), op.width(), op.mask());
    case dipa::Modality::spc:
      return spc_matrix(op.pixels(), op.measurements(), op.spc_scale());
    case dipa::Modality::sr:
      return sr_matrix(op.height(), op.width(), op.factor(), op.blur_sigma());
  }
  return {};
}

// Soft threshold of the 2-D DCT, DC optionally exempt.
inline Vector dct_denoise(const Vector& x, std::size_t h, std::size_t w, double sigma, bool preserve_dc) {
  Vector c = dct2(x, h, w);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i == 0 && preserve_dc) continue;
    const double a = std::abs(c[i]) - sigma;
    c[i] = a > 0.0 ? std::copysign(a, c[i]) : 0.0;
  }
  return dct2(c, h, w, true);
}

using VecFn = std::function<Vector(const Vector&)>;

struct SolverSpec {
  bool red = false;
  int iterations = 20;
  double alpha = 0.4;
  double lambda = 0.0;
};

// Straight-line preconditioned FISTA with dense A.
inline std::vector<Vector> fista(const Matrix& a, const Vector& y, const VecFn& precondition, const VecFn& denoise,
                                 const SolverSpec& s) {
  const std::size_t n = a[0].size();
  Vector prev(n, 0.0), z(n, 0.0);
  double t = 1.0;
  std::vector<Vector> iterates;
  for (int k = 1; k <= s.iterations; ++k) {
    Vector r = mul(a, z);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    const Vector step = precondition(mul_t(a, r));
    Vector x(n);
    if (!s.red) {
      Vector v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = z[i] - s.alpha * step[i];
      x = denoise(v);
    } else {
      const Vector d = denoise(z);
      for (std::size_t i = 0; i < n; ++i) x[i] = z[i] - s.alpha * (step[i] + s.lambda * (z[i] - d[i]));
    }
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    const double wgt = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + wgt * (x[i] - prev[i]);
    prev = x;
    t = t_next;
    iterates.push_back(x);
  }
  return iterates;
}

}  // namespace oracle
