#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dipa {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles. Value type; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros_like(const Tensor& other);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& vector() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessors, valid for rank-2 tensors.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  // Value of a single-element tensor; throws otherwise.
  double item() const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Real and imaginary planes of a complex signal.
struct ComplexPair {
  Tensor real;
  Tensor imag;

  ComplexPair() = default;
  ComplexPair(Tensor re, Tensor im);

  const Shape& shape() const { return real.shape(); }
  // Stacks into a {2, ...} tensor (real plane first).
  Tensor stacked() const;
  static ComplexPair unstack(const Tensor& stacked);
};

double dot(const Tensor& a, const Tensor& b);
double norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

// Dense matrix-vector product; x is read as a flat vector of length cols.
Tensor matvec(const Tensor& matrix, const Tensor& x);

}  // namespace dipa
