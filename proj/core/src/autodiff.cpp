#include "dipa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dipa {

namespace {

using Inputs = std::span<const Tensor* const>;
using GradInputs = std::span<Tensor* const>;

void require_same_size(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": size mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

void accumulate(Tensor* target, const Tensor& g, double factor = 1.0) {
  if (target == nullptr) return;
  auto t = target->data();
  auto s = g.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += factor * s[i];
}

template <class Op>
Var elementwise_binary(const char* name, Var a, Var b, Op op) {
  require_same_size(a, b, name);
  return a.tape().record(
      name, {a, b},
      [op](Inputs in) {
        Tensor out = *in[0];
        const auto& rhs = *in[1];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = op.value(out[i], rhs[i]);
        return out;
      },
      [op](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const auto& x = *in[0];
        const auto& y = *in[1];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (gi[0] != nullptr) (*gi[0])[i] += g[i] * op.dx(x[i], y[i]);
          if (gi[1] != nullptr) (*gi[1])[i] += g[i] * op.dy(x[i], y[i]);
        }
      });
}

struct AddOp {
  double value(double x, double y) const { return x + y; }
  double dx(double, double) const { return 1.0; }
  double dy(double, double) const { return 1.0; }
};
struct SubOp {
  double value(double x, double y) const { return x - y; }
  double dx(double, double) const { return 1.0; }
  double dy(double, double) const { return -1.0; }
};
struct MulOp {
  double value(double x, double y) const { return x * y; }
  double dx(double, double y) const { return y; }
  double dy(double x, double) const { return x; }
};
struct DivOp {
  double value(double x, double y) const { return x / y; }
  double dx(double, double y) const { return 1.0 / y; }
  double dy(double x, double y) const { return -x / (y * y); }
};

}  // namespace

IndexList make_index_list(std::vector<std::size_t> indices) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(indices));
}

Var add(Var a, Var b) { return elementwise_binary("add", a, b, AddOp{}); }
Var sub(Var a, Var b) { return elementwise_binary("sub", a, b, SubOp{}); }
Var mul(Var a, Var b) { return elementwise_binary("mul", a, b, MulOp{}); }
Var div(Var a, Var b) { return elementwise_binary("div", a, b, DivOp{}); }

Var scale(Var a, double factor) {
  return a.tape().record(
      "scale", {a},
      [factor](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v *= factor;
        return out;
      },
      [factor](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], g, factor); });
}

Var add_constant(Var a, double offset) {
  return a.tape().record(
      "add_constant", {a},
      [offset](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v += offset;
        return out;
      },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], g); });
}

Var sum(Var a) {
  return a.tape().record(
      "sum", {a},
      [](Inputs in) {
        double s = 0.0;
        for (double v : in[0]->data()) s += v;
        return Tensor::scalar(s);
      },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        const double s = g[0];
        for (double& v : gi[0]->data()) v += s;
      });
}

Var dot(Var a, Var b) {
  require_same_size(a, b, "dot");
  return a.tape().record(
      "dot", {a, b}, [](Inputs in) { return Tensor::scalar(dot(*in[0], *in[1])); },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        accumulate(gi[0], *in[1], g[0]);
        accumulate(gi[1], *in[0], g[0]);
      });
}

Var sum_squares(Var a) {
  return a.tape().record(
      "sum_squares", {a}, [](Inputs in) { return Tensor::scalar(dot(*in[0], *in[0])); },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], *in[0], 2.0 * g[0]); });
}

Var norm(Var a) {
  return a.tape().record(
      "norm", {a}, [](Inputs in) { return Tensor::scalar(norm(*in[0])); },
      [](Inputs in, const Tensor& out, const Tensor& g, GradInputs gi) {
        const double n = out[0];
        if (n == 0.0) return;
        accumulate(gi[0], *in[0], g[0] / n);
      });
}

Var sqrt(Var a) {
  return a.tape().record(
      "sqrt", {a},
      [](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v = std::sqrt(v);
        return out;
      },
      [](Inputs, const Tensor& out, const Tensor& g, GradInputs gi) {
        Tensor& target = *gi[0];
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (out[i] > 0.0) target[i] += g[i] / (2.0 * out[i]);
        }
      });
}

Var cosine_similarity(Var a, Var b, double eps) {
  // max(|a| |b|, eps): an additive eps would bias parallel vectors away
  // from cos = 1. The product is formed as sqrt((a.a)(b.b)) because
  // sqrt(s * s) == s in IEEE arithmetic, so identical inputs give exactly 1
  // and no rounding-level gradient.
  Var denom = sqrt(mul(dot(a, a), dot(b, b)));
  if (!(denom.value().item() > eps)) denom = a.tape().constant(Tensor::scalar(eps));
  return div(dot(a, b), denom);
}

Var matvec(Var matrix, Var x) {
  const Shape& ms = matrix.shape();
  if (ms.size() != 2 || ms[1] != x.size()) {
    throw std::invalid_argument("matvec: matrix " + shape_string(ms) + " vs input " + shape_string(x.shape()));
  }
  const Shape out_shape = ms[0] == ms[1] ? x.shape() : Shape{ms[0]};
  return matrix.tape().record(
      "matvec", {matrix, x},
      [out_shape](Inputs in) { return matvec(*in[0], *in[1]).reshaped(out_shape); },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const Tensor& m = *in[0];
        const Tensor& v = *in[1];
        const std::size_t rows = m.shape()[0];
        const std::size_t cols = m.shape()[1];
        const double* mp = m.data().data();
        if (gi[0] != nullptr) {
          double* gp = gi[0]->data().data();
          const double* vp = v.data().data();
          for (std::size_t r = 0; r < rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            double* row = gp + r * cols;
            for (std::size_t c = 0; c < cols; ++c) row[c] += gr * vp[c];
          }
        }
        if (gi[1] != nullptr) {
          double* xp = gi[1]->data().data();
          for (std::size_t r = 0; r < rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            const double* row = mp + r * cols;
            for (std::size_t c = 0; c < cols; ++c) xp[c] += gr * row[c];
          }
        }
      });
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  return a.tape().record(
      "reshape", {a}, [shape](Inputs in) { return in[0]->reshaped(shape); },
      [](Inputs, const Tensor&, const Tensor& g, GradInputs gi) { accumulate(gi[0], g); });
}

Var gather(Var a, IndexList indices, Shape out_shape) {
  if (numel(out_shape) != indices->size()) {
    throw std::invalid_argument("gather: " + std::to_string(indices->size()) + " indices for shape " +
                                shape_string(out_shape));
  }
  for (std::size_t idx : *indices) {
    if (idx >= a.size()) throw std::invalid_argument("gather: index " + std::to_string(idx) + " out of range");
  }
  return a.tape().record(
      "gather", {a},
      [indices, out_shape](Inputs in) {
        Tensor out(out_shape);
        const auto& src = *in[0];
        for (std::size_t i = 0; i < indices->size(); ++i) out[i] = src[(*indices)[i]];
        return out;
      },
      [indices](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        Tensor& target = *gi[0];
        for (std::size_t i = 0; i < indices->size(); ++i) target[(*indices)[i]] += g[i];
      });
}

Var scatter(Var a, IndexList indices, Shape out_shape) {
  if (a.size() != indices->size()) {
    throw std::invalid_argument("scatter: " + std::to_string(indices->size()) + " indices for " +
                                std::to_string(a.size()) + " values");
  }
  const std::size_t total = numel(out_shape);
  for (std::size_t idx : *indices) {
    if (idx >= total) throw std::invalid_argument("scatter: index " + std::to_string(idx) + " out of range");
  }
  return a.tape().record(
      "scatter", {a},
      [indices, out_shape](Inputs in) {
        Tensor out(out_shape);
        const auto& src = *in[0];
        for (std::size_t i = 0; i < indices->size(); ++i) out[(*indices)[i]] += src[i];
        return out;
      },
      [indices](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        Tensor& target = *gi[0];
        for (std::size_t i = 0; i < indices->size(); ++i) target[i] += g[(*indices)[i]];
      });
}

namespace {
std::vector<char> exempt_flags(const IndexList& exempt, std::size_t n) {
  std::vector<char> flags(n, 0);
  if (exempt) {
    for (std::size_t i : *exempt) {
      if (i < n) flags[i] = 1;
    }
  }
  return flags;
}
}  // namespace

Var soft_threshold(Var a, double threshold, IndexList exempt) {
  if (threshold < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  return a.tape().record(
      "soft_threshold", {a},
      [threshold, exempt](Inputs in) {
        Tensor out = *in[0];
        const auto flags = exempt_flags(exempt, out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (flags[i]) continue;
          const double v = out[i];
          const double mag = std::abs(v) - threshold;
          out[i] = mag > 0.0 ? std::copysign(mag, v) : 0.0;
        }
        return out;
      },
      [threshold, exempt](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const auto& x = *in[0];
        const auto flags = exempt_flags(exempt, x.size());
        Tensor& target = *gi[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (flags[i] || std::abs(x[i]) > threshold) target[i] += g[i];
        }
      });
}

Var silu(Var a) {
  return a.tape().record(
      "silu", {a},
      [](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v = v / (1.0 + std::exp(-v));
        return out;
      },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const auto& x = *in[0];
        Tensor& target = *gi[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double s = 1.0 / (1.0 + std::exp(-x[i]));
          target[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
      });
}

namespace {
// out(r, c) = sum_{i,j} k(i, j) img(r + i - ci, c + j - cj) with periodic wrap.
// flip = true uses k(kh-1-i, kw-1-j), the adjoint kernel.
Tensor periodic_filter(const Tensor& img, const Tensor& kernel, bool flip) {
  const std::size_t h = img.shape()[0];
  const std::size_t w = img.shape()[1];
  const std::size_t kh = kernel.shape()[0];
  const std::size_t kw = kernel.shape()[1];
  const long ci = static_cast<long>(kh / 2);
  const long cj = static_cast<long>(kw / 2);
  Tensor out({h, w});
  for (std::size_t i = 0; i < kh; ++i) {
    for (std::size_t j = 0; j < kw; ++j) {
      const double k = flip ? kernel.at(kh - 1 - i, kw - 1 - j) : kernel.at(i, j);
      if (k == 0.0) continue;
      const long di = static_cast<long>(i) - ci;
      const long dj = static_cast<long>(j) - cj;
      for (std::size_t r = 0; r < h; ++r) {
        const long sr = ((static_cast<long>(r) + di) % static_cast<long>(h) + static_cast<long>(h)) %
                        static_cast<long>(h);
        for (std::size_t c = 0; c < w; ++c) {
          const long sc = ((static_cast<long>(c) + dj) % static_cast<long>(w) + static_cast<long>(w)) %
                          static_cast<long>(w);
          out.at(r, c) += k * img.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        }
      }
    }
  }
  return out;
}
}  // namespace

Var circular_conv2d(Var image, const Tensor& kernel) {
  if (image.shape().size() != 2) throw std::invalid_argument("circular_conv2d: image must be 2-D");
  if (kernel.rank() != 2 || kernel.shape()[0] % 2 == 0 || kernel.shape()[1] % 2 == 0) {
    throw std::invalid_argument("circular_conv2d: kernel must be 2-D with odd extents");
  }
  return image.tape().record(
      "circular_conv2d", {image}, [kernel](Inputs in) { return periodic_filter(*in[0], kernel, false); },
      [kernel](Inputs, const Tensor&, const Tensor& g, GradInputs gi) {
        accumulate(gi[0], periodic_filter(g, kernel, true));
      });
}

Var channel_mix(Var weights, Var input, Var bias) {
  const Shape& ws = weights.shape();
  const Shape& xs = input.shape();
  if (ws.size() != 2 || xs.size() != 3 || ws[1] != xs[0] || bias.size() != ws[0]) {
    throw std::invalid_argument("channel_mix: weights " + shape_string(ws) + ", input " + shape_string(xs) +
                                ", bias " + shape_string(bias.shape()));
  }
  return weights.tape().record(
      "channel_mix", {weights, input, bias},
      [](Inputs in) {
        const Tensor& w = *in[0];
        const Tensor& x = *in[1];
        const Tensor& b = *in[2];
        const std::size_t co = w.shape()[0];
        const std::size_t ci = w.shape()[1];
        const std::size_t hw = x.shape()[1] * x.shape()[2];
        Tensor out({co, x.shape()[1], x.shape()[2]});
        double* op = out.data().data();
        const double* xp = x.data().data();
        for (std::size_t o = 0; o < co; ++o) {
          double* orow = op + o * hw;
          std::fill(orow, orow + hw, b[o]);
          for (std::size_t i = 0; i < ci; ++i) {
            const double wv = w.at(o, i);
            const double* xrow = xp + i * hw;
            for (std::size_t p = 0; p < hw; ++p) orow[p] += wv * xrow[p];
          }
        }
        return out;
      },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const Tensor& w = *in[0];
        const Tensor& x = *in[1];
        const std::size_t co = w.shape()[0];
        const std::size_t ci = w.shape()[1];
        const std::size_t hw = x.shape()[1] * x.shape()[2];
        const double* gp = g.data().data();
        const double* xp = x.data().data();
        for (std::size_t o = 0; o < co; ++o) {
          const double* grow = gp + o * hw;
          if (gi[2] != nullptr) {
            double s = 0.0;
            for (std::size_t p = 0; p < hw; ++p) s += grow[p];
            (*gi[2])[o] += s;
          }
          for (std::size_t i = 0; i < ci; ++i) {
            if (gi[0] != nullptr) {
              const double* xrow = xp + i * hw;
              double s = 0.0;
              for (std::size_t p = 0; p < hw; ++p) s += grow[p] * xrow[p];
              gi[0]->at(o, i) += s;
            }
            if (gi[1] != nullptr) {
              const double wv = w.at(o, i);
              double* dx = gi[1]->data().data() + i * hw;
              for (std::size_t p = 0; p < hw; ++p) dx[p] += wv * grow[p];
            }
          }
        }
      });
}

namespace {
// Valid output range for a tap offset d over a length-n axis: rows r with
// 0 <= r + d < n.
inline void tap_range(long d, std::size_t n, std::size_t& lo, std::size_t& hi) {
  const long nn = static_cast<long>(n);
  lo = static_cast<std::size_t>(std::max(0L, -d));
  hi = static_cast<std::size_t>(std::max(0L, std::min(nn, nn - d)));
}
}  // namespace

Var depthwise_conv2d(Var input, Var kernels, Var bias) {
  const Shape& xs = input.shape();
  const Shape& ks = kernels.shape();
  if (xs.size() != 3 || ks.size() != 3 || ks[0] != xs[0] || bias.size() != xs[0] || ks[1] % 2 == 0 ||
      ks[2] % 2 == 0) {
    throw std::invalid_argument("depthwise_conv2d: input " + shape_string(xs) + ", kernels " + shape_string(ks));
  }
  return input.tape().record(
      "depthwise_conv2d", {input, kernels, bias},
      [](Inputs in) {
        const Tensor& x = *in[0];
        const Tensor& k = *in[1];
        const Tensor& b = *in[2];
        const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
        const std::size_t kh = k.shape()[1], kw = k.shape()[2];
        const long ch = static_cast<long>(kh / 2), cw = static_cast<long>(kw / 2);
        Tensor out(x.shape());
        for (std::size_t ch_i = 0; ch_i < c; ++ch_i) {
          const double* xp = x.data().data() + ch_i * h * w;
          double* op = out.data().data() + ch_i * h * w;
          std::fill(op, op + h * w, b[ch_i]);
          for (std::size_t i = 0; i < kh; ++i) {
            const long di = static_cast<long>(i) - ch;
            std::size_t r0, r1;
            tap_range(di, h, r0, r1);
            for (std::size_t j = 0; j < kw; ++j) {
              const double kv = k[(ch_i * kh + i) * kw + j];
              const long dj = static_cast<long>(j) - cw;
              std::size_t c0, c1;
              tap_range(dj, w, c0, c1);
              for (std::size_t r = r0; r < r1; ++r) {
                const double* src = xp + (static_cast<long>(r) + di) * static_cast<long>(w) + dj;
                double* dst = op + r * w;
                for (std::size_t cc = c0; cc < c1; ++cc) dst[cc] += kv * src[cc];
              }
            }
          }
        }
        return out;
      },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        const Tensor& x = *in[0];
        const Tensor& k = *in[1];
        const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
        const std::size_t kh = k.shape()[1], kw = k.shape()[2];
        const long ch = static_cast<long>(kh / 2), cw = static_cast<long>(kw / 2);
        for (std::size_t ch_i = 0; ch_i < c; ++ch_i) {
          const double* xp = x.data().data() + ch_i * h * w;
          const double* gp = g.data().data() + ch_i * h * w;
          if (gi[2] != nullptr) {
            double s = 0.0;
            for (std::size_t p = 0; p < h * w; ++p) s += gp[p];
            (*gi[2])[ch_i] += s;
          }
          for (std::size_t i = 0; i < kh; ++i) {
            const long di = static_cast<long>(i) - ch;
            std::size_t r0, r1;
            tap_range(di, h, r0, r1);
            for (std::size_t j = 0; j < kw; ++j) {
              const std::size_t kidx = (ch_i * kh + i) * kw + j;
              const long dj = static_cast<long>(j) - cw;
              std::size_t c0, c1;
              tap_range(dj, w, c0, c1);
              double ks = 0.0;
              const double kv = k[kidx];
              double* dxp = gi[0] != nullptr ? gi[0]->data().data() + ch_i * h * w : nullptr;
              for (std::size_t r = r0; r < r1; ++r) {
                const long off = (static_cast<long>(r) + di) * static_cast<long>(w) + dj;
                const double* src = xp + off;
                const double* grow = gp + r * w;
                for (std::size_t cc = c0; cc < c1; ++cc) ks += grow[cc] * src[cc];
                if (dxp != nullptr) {
                  double* dst = dxp + off;
                  for (std::size_t cc = c0; cc < c1; ++cc) dst[cc] += kv * grow[cc];
                }
              }
              if (gi[1] != nullptr) (*gi[1])[kidx] += ks;
            }
          }
        }
      });
}

Var add_channel_bias(Var input, Var bias) {
  const Shape& xs = input.shape();
  if (xs.size() != 3 || bias.size() != xs[0]) {
    throw std::invalid_argument("add_channel_bias: input " + shape_string(xs) + ", bias " +
                                shape_string(bias.shape()));
  }
  return input.tape().record(
      "add_channel_bias", {input, bias},
      [](Inputs in) {
        Tensor out = *in[0];
        const std::size_t hw = out.shape()[1] * out.shape()[2];
        for (std::size_t c = 0; c < out.shape()[0]; ++c) {
          for (std::size_t p = 0; p < hw; ++p) out[c * hw + p] += (*in[1])[c];
        }
        return out;
      },
      [](Inputs in, const Tensor&, const Tensor& g, GradInputs gi) {
        accumulate(gi[0], g);
        if (gi[1] != nullptr) {
          const std::size_t hw = in[0]->shape()[1] * in[0]->shape()[2];
          for (std::size_t c = 0; c < in[0]->shape()[0]; ++c) {
            double s = 0.0;
            for (std::size_t p = 0; p < hw; ++p) s += g[c * hw + p];
            (*gi[1])[c] += s;
          }
        }
      });
}

GradientCheck check_gradient(const TapeFunction& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("check_gradient: step must be positive");

  auto evaluate = [&f](const Tensor& x, std::size_t coordinate) {
    Tape tape;
    const double v = f(tape.constant(x)).value().item();
    if (!std::isfinite(v)) {
      throw std::runtime_error("check_gradient: non-finite function value when perturbing coordinate " +
                               std::to_string(coordinate));
    }
    return v;
  };

  Tape tape;
  Var x = tape.leaf(point);
  Var loss = f(x);
  if (!std::isfinite(loss.value().item())) {
    throw std::runtime_error("check_gradient: non-finite function value at the base point");
  }
  const Tensor analytic = tape.grad(loss, std::span<const Var>(&x, 1))[0];

  GradientCheck result;
  Tensor probe = point;
  for (std::size_t j = 0; j < point.size(); ++j) {
    probe[j] = point[j] + step;
    const double up = evaluate(probe, j);
    probe[j] = point[j] - step;
    const double down = evaluate(probe, j);
    probe[j] = point[j];
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), 1e-12});
    const double err = std::abs(analytic[j] - numeric) / denom;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = j;
    }
  }
  return result;
}

}  // namespace dipa
