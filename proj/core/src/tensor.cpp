#include "dipa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace dipa {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw std::invalid_argument("tensor shape " + shape_string(shape_) + " does not match " +
                                std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape()); }

Tensor Tensor::identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

ComplexPair::ComplexPair(Tensor re, Tensor im) : real(std::move(re)), imag(std::move(im)) {
  if (real.shape() != imag.shape()) {
    throw std::invalid_argument("complex pair planes differ: " + shape_string(real.shape()) + " vs " +
                                shape_string(imag.shape()));
  }
}

Tensor ComplexPair::stacked() const {
  Shape shape{2};
  shape.insert(shape.end(), real.shape().begin(), real.shape().end());
  std::vector<double> data(real.data().begin(), real.data().end());
  data.insert(data.end(), imag.data().begin(), imag.data().end());
  return Tensor(std::move(shape), std::move(data));
}

ComplexPair ComplexPair::unstack(const Tensor& stacked) {
  if (stacked.rank() < 1 || stacked.shape()[0] != 2) {
    throw std::invalid_argument("expected leading dimension 2, got " + shape_string(stacked.shape()));
  }
  Shape plane(stacked.shape().begin() + 1, stacked.shape().end());
  const std::size_t half = stacked.size() / 2;
  auto data = stacked.data();
  return {Tensor(plane, std::vector<double>(data.begin(), data.begin() + half)),
          Tensor(plane, std::vector<double>(data.begin() + half, data.end()))};
}

namespace {
void require_same_size(const Tensor& a, const Tensor& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}
}  // namespace

double dot(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor matvec(const Tensor& matrix, const Tensor& x) {
  if (matrix.rank() != 2 || matrix.shape()[1] != x.size()) {
    throw std::invalid_argument("matvec: matrix " + shape_string(matrix.shape()) + " vs vector of length " +
                                std::to_string(x.size()));
  }
  const std::size_t rows = matrix.shape()[0];
  const std::size_t cols = matrix.shape()[1];
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = matrix.data().data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

}  // namespace dipa
