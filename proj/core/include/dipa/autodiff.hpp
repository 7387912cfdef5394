#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "dipa/tape.hpp"

namespace dipa {

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

IndexList make_index_list(std::vector<std::size_t> indices);

// Elementwise; operands must have equal element counts. Result takes a's shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double factor);
Var add_constant(Var a, double offset);

Var sum(Var a);
Var dot(Var a, Var b);
Var sum_squares(Var a);
// Euclidean norm; the subgradient at zero is taken as zero.
Var norm(Var a);
// a.b / max(|a| |b|, eps)
Var cosine_similarity(Var a, Var b, double eps);

// matrix is {rows, cols}; x is read flat with cols entries. The result keeps
// x's shape when rows == cols, else it is {rows}.
Var matvec(Var matrix, Var x);

Var reshape(Var a, Shape shape);

// out[i] = a[indices[i]]
Var gather(Var a, IndexList indices, Shape out_shape);
// Zeros of out_shape with out[indices[i]] += a[i]. Transpose of gather.
Var scatter(Var a, IndexList indices, Shape out_shape);

// sign(x) max(|x| - threshold, 0); entries listed in exempt pass through.
// The derivative at |x| == threshold is 0.
Var soft_threshold(Var a, double threshold, IndexList exempt = nullptr);

// Elementwise square root of non-negative entries; derivative 0 at 0.
Var sqrt(Var a);

// x * sigmoid(x)
Var silu(Var a);

// Periodic 2-D convolution of an {h, w} image with a fixed odd-sized kernel
// centered at (kh/2, kw/2).
Var circular_conv2d(Var image, const Tensor& kernel);

// weights {co, ci}, input {ci, h, w}, bias {co} -> {co, h, w}
Var channel_mix(Var weights, Var input, Var bias);
// input {c, h, w}, kernels {c, kh, kw}, bias {c}; zero padding, same size.
Var depthwise_conv2d(Var input, Var kernels, Var bias);
// input {c, h, w} + bias {c} broadcast over pixels
Var add_channel_bias(Var input, Var bias);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

// Builds a scalar loss on x's tape.
using TapeFunction = std::function<Var(Var x)>;

// Compares tape gradients with central differences at every coordinate.
// Relative error per coordinate is |a - d| / max(|a|, |d|, 1e-12).
// Throws if the function is non-finite anywhere it is evaluated.
GradientCheck check_gradient(const TapeFunction& f, const Tensor& point, double step);

}  // namespace dipa
