#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dipa/tape.hpp"
#include "dipa/tensor.hpp"

namespace dipa {

// Unnormalized in-place DFT of any length: radix-2 butterflies for powers of
// two, Bluestein's chirp-z otherwise. inverse uses exp(+i...) kernels.
void fft(std::span<std::complex<double>> data, bool inverse);

bool is_power_of_two(std::size_t n);

// Unitary 2-D DFT (1/sqrt(hw) scaling) of a real {h, w} image.
ComplexPair dft2(const Tensor& image);
ComplexPair dft2(const ComplexPair& signal);
// Real part of the unitary inverse DFT.
Tensor idft2(const ComplexPair& spectrum);
ComplexPair idft2_complex(const ComplexPair& spectrum);

// Unnormalized Walsh-Hadamard transform in natural (Kronecker) order:
// y = H x with H[i][j] = (-1)^popcount(i & j). fwht(fwht(x)) == n x.
Tensor fwht(const Tensor& x);

// Natural-order Hadamard row index of the s-th sequency-ordered row (the row
// with s sign changes), for s in [0, n).
std::vector<std::size_t> sequency_order(std::size_t n);

// Orthonormal 2-D type-II DCT and its inverse on {h, w} images.
Tensor dct2(const Tensor& image);
Tensor idct2(const Tensor& coefficients);

// Tape versions. dft2 maps {h, w} to a stacked {2, h, w} spectrum and
// idft2_real maps it back to the real part.
Var dft2(Var image);
Var idft2_real(Var spectrum);
Var fwht(Var x);
Var dct2(Var image);
Var idct2(Var coefficients);

}  // namespace dipa
