#include "nlos/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nlos/common/error.hpp"
#include "nlos/kernels/kernels.hpp"

namespace nlos::ops {
namespace {

using Grads = std::span<Tensor* const>;

Tape* common_tape(std::string_view op, std::span<const DiffTensor> inputs) {
  Tape* tape = nullptr;
  for (const DiffTensor& in : inputs) {
    if (!in.defined()) throw ParameterError(std::string(op) + ": undefined input");
    if (!in.tracked()) continue;
    if (tape != nullptr && tape != in.tape()) {
      throw ParameterError(std::string(op) + ": inputs recorded on different tapes");
    }
    tape = in.tape();
  }
  return tape;
}

// Records `out` if any input is tracked. `make_backward` is only invoked then,
// so untracked forward passes never build closures.
template <class MakeBackward>
DiffTensor finish(std::string_view op, std::span<const DiffTensor> inputs, Tensor out,
                  MakeBackward&& make_backward) {
  if (!out.all_finite()) throw NumericError(std::string(op) + ": non-finite forward value");
  Tape* tape = common_tape(op, inputs);
  if (tape == nullptr) return DiffTensor(std::move(out));
  return tape->record(op, inputs, std::move(out), BackwardFn(make_backward()));
}

void require_same_shape(std::string_view op, const DiffTensor& a, const DiffTensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(std::string_view op, const DiffTensor& x, std::size_t rank) {
  if (x.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
  }
}

// View of a tensor as [outer x n x inner] around `axis`.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

void check_axis(std::string_view op, const DiffTensor& x, std::size_t axis) {
  if (axis >= x.shape().size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_string(x.shape()));
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class F, class DF>
DiffTensor unary(std::string_view op, const DiffTensor& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const DiffTensor inputs[] = {x};
  return finish(op, inputs, std::move(out), [xs = x.shared_value(), df] {
    return [xs, df](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      const Tensor& xv = *xs;
      Tensor& gx = *g[0];
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += up[i] * df(xv[i]);
    };
  });
}

}  // namespace

// --- linear algebra -------------------------------------------------------

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ " + shape_string(a.shape()) + " * " +
                         shape_string(b.shape()));
  }
  const auto& kt = kernels::table(kernels::active_backend());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) kt.axpy(av[i * k + p], bv.data().data() + p * n, row, n);
  }
  const DiffTensor inputs[] = {a, b};
  return finish("matmul", inputs, std::move(out), [as = a.shared_value(), bs = b.shared_value()] {
    return [as, bs](const Tensor& up, Grads g) {
      const auto& kt = kernels::table(kernels::active_backend());
      const std::size_t m = as->dim(0), k = as->dim(1), n = bs->dim(1);
      const double* u = up.data().data();
      if (g[0] != nullptr) {  // dA = dC * B^T
        double* ga = g[0]->data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            ga[i * k + p] += kt.dot(u + i * n, bs->data().data() + p * n, n);
          }
        }
      }
      if (g[1] != nullptr) {  // dB = A^T * dC
        double* gb = g[1]->data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) kt.axpy((*as)[i * k + p], u + i * n, gb + p * n, n);
        }
      }
    };
  });
}

// --- elementwise ------------------------------------------------------------

DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out += b.value();
  const DiffTensor inputs[] = {a, b};
  return finish("add", inputs, std::move(out), [] {
    return [](const Tensor& up, Grads g) {
      for (Tensor* gi : g) {
        if (gi != nullptr) *gi += up;
      }
    };
  });
}

DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const DiffTensor inputs[] = {a, b};
  return finish("sub", inputs, std::move(out), [] {
    return [](const Tensor& up, Grads g) {
      if (g[0] != nullptr) *g[0] += up;
      if (g[1] != nullptr) {
        for (std::size_t i = 0; i < up.size(); ++i) (*g[1])[i] -= up[i];
      }
    };
  });
}

DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  kernels::mul_add(a.value().data(), b.value().data(), out.data());
  const DiffTensor inputs[] = {a, b};
  return finish("mul", inputs, std::move(out), [as = a.shared_value(), bs = b.shared_value()] {
    return [as, bs](const Tensor& up, Grads g) {
      if (g[0] != nullptr) kernels::mul_add(up.data(), bs->data(), g[0]->data());
      if (g[1] != nullptr) kernels::mul_add(up.data(), as->data(), g[1]->data());
    };
  });
}

DiffTensor scale(const DiffTensor& a, double s) {
  Tensor out(a.shape());
  kernels::axpy(s, a.value().data(), out.data());
  const DiffTensor inputs[] = {a};
  return finish("scale", inputs, std::move(out), [s] {
    return [s](const Tensor& up, Grads g) {
      if (g[0] != nullptr) kernels::axpy(s, up.data(), g[0]->data());
    };
  });
}

DiffTensor silu(const DiffTensor& x) {
  return unary(
      "silu", x, [](double v) { return v * sigmoid(v); },
      [](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

DiffTensor gelu(const DiffTensor& x) {
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
        return cdf + v * pdf;
      });
}

DiffTensor softplus(const DiffTensor& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      sigmoid);
}

DiffTensor abs(const DiffTensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

DiffTensor square(const DiffTensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

// --- reductions -------------------------------------------------------------

DiffTensor sum(const DiffTensor& x) {
  Tensor out = Tensor::scalar(x.value().sum());
  const DiffTensor inputs[] = {x};
  return finish("sum", inputs, std::move(out), [] {
    return [](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (double& v : g[0]->data()) v += up[0];
    };
  });
}

DiffTensor reduce_sum(const DiffTensor& x, std::size_t axis) {
  check_axis("reduce_sum", x, axis);
  const AxisView v = axis_view(x.shape(), axis);
  const Tensor& xv = x.value();
  Tensor out(drop_axis(x.shape(), axis));
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.n; ++j) {
      const double* src = xv.data().data() + (o * v.n + j) * v.inner;
      double* dst = out.data().data() + o * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
    }
  }
  const DiffTensor inputs[] = {x};
  return finish("reduce_sum", inputs, std::move(out), [v] {
    return [v](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t j = 0; j < v.n; ++j) {
          double* dst = g[0]->data().data() + (o * v.n + j) * v.inner;
          const double* src = up.data().data() + o * v.inner;
          for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
        }
      }
    };
  });
}

MaxArg reduce_max_arg(const DiffTensor& x, std::size_t axis) {
  check_axis("reduce_max_arg", x, axis);
  const AxisView v = axis_view(x.shape(), axis);
  const Tensor& xv = x.value();
  Tensor out(drop_axis(x.shape(), axis));
  IndexTensor idx{out.shape(), std::vector<std::size_t>(out.size(), 0)};
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      std::size_t best = 0;
      double best_v = xv[base];
      for (std::size_t j = 1; j < v.n; ++j) {
        const double c = xv[base + j * v.inner];
        if (c > best_v) {
          best_v = c;
          best = j;
        }
      }
      out[o * v.inner + i] = best_v;
      idx.data[o * v.inner + i] = best;
    }
  }
  const DiffTensor inputs[] = {x};
  auto shared_idx = std::make_shared<const std::vector<std::size_t>>(idx.data);
  DiffTensor values = finish("reduce_max_arg", inputs, std::move(out), [v, shared_idx] {
    return [v, shared_idx](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      const auto& id = *shared_idx;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t r = o * v.inner + i;
          (*g[0])[o * v.n * v.inner + id[r] * v.inner + i] += up[r];
        }
      }
    };
  });
  return MaxArg{std::move(values), std::move(idx)};
}

DiffTensor softmax(const DiffTensor& x, std::size_t axis) {
  check_axis("softmax", x, axis);
  const AxisView v = axis_view(x.shape(), axis);
  const Tensor& xv = x.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.n * v.inner + i;
      double m = xv[base];
      for (std::size_t j = 1; j < v.n; ++j) m = std::max(m, xv[base + j * v.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < v.n; ++j) {
        const double e = std::exp(xv[base + j * v.inner] - m);
        out[base + j * v.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] /= z;
    }
  }
  auto ys = std::make_shared<const Tensor>(out);
  const DiffTensor inputs[] = {x};
  return finish("softmax", inputs, std::move(out), [v, ys] {
    return [v, ys](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      const Tensor& y = *ys;
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.n * v.inner + i;
          double dot = 0.0;
          for (std::size_t j = 0; j < v.n; ++j) {
            dot += up[base + j * v.inner] * y[base + j * v.inner];
          }
          for (std::size_t j = 0; j < v.n; ++j) {
            const std::size_t p = base + j * v.inner;
            (*g[0])[p] += y[p] * (up[p] - dot);
          }
        }
      }
    };
  });
}

// --- layout -----------------------------------------------------------------

DiffTensor reshape(const DiffTensor& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const DiffTensor inputs[] = {x};
  return finish("reshape", inputs, std::move(out), [] {
    return [](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (std::size_t i = 0; i < up.size(); ++i) (*g[0])[i] += up[i];
    };
  });
}

namespace {
// Flat source offset for every output position of a permutation.
std::vector<std::size_t> permutation_map(const Shape& in, std::span<const std::size_t> axes) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[axes[i]];
  const std::size_t n = shape_size(in);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> coord(r, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += coord[i] * in_stride[axes[i]];
    map[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++coord[i] < out_shape[i]) break;
      coord[i] = 0;
    }
  }
  return map;
}
}  // namespace

DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> axes) {
  const Shape& in = x.shape();
  if (axes.size() != in.size()) throw DimensionError("permute: axes length differs from rank");
  std::vector<bool> seen(in.size(), false);
  for (std::size_t a : axes) {
    if (a >= in.size() || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out_shape[i] = in[axes[i]];
  auto map = std::make_shared<const std::vector<std::size_t>>(permutation_map(in, axes));
  Tensor out(out_shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[(*map)[i]];
  const DiffTensor inputs[] = {x};
  return finish("permute", inputs, std::move(out), [map] {
    return [map](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (std::size_t i = 0; i < up.size(); ++i) (*g[0])[(*map)[i]] += up[i];
    };
  });
}

DiffTensor concat(std::span<const DiffTensor> xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  check_axis("concat", xs[0], axis);
  Shape shape = xs[0].shape();
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const DiffTensor& x : xs) {
    Shape s = x.shape();
    if (s.size() != shape.size()) throw DimensionError("concat: rank mismatch");
    s[axis] = shape[axis];
    if (s != shape) throw DimensionError("concat: extents differ off the concat axis");
    extents.push_back(x.dim(axis));
    total += x.dim(axis);
  }
  shape[axis] = total;
  const AxisView v = axis_view(shape, axis);
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const std::size_t len = extents[t] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* src = xs[t].value().data().data() + o * len;
      std::copy(src, src + len, out.data().data() + o * v.n * v.inner + offset * v.inner);
    }
    offset += extents[t];
  }
  return finish("concat", xs, std::move(out), [v, extents] {
    return [v, extents](const Tensor& up, Grads g) {
      std::size_t offset = 0;
      for (std::size_t t = 0; t < extents.size(); ++t) {
        const std::size_t len = extents[t] * v.inner;
        if (g[t] != nullptr) {
          for (std::size_t o = 0; o < v.outer; ++o) {
            const double* src = up.data().data() + o * v.n * v.inner + offset * v.inner;
            double* dst = g[t]->data().data() + o * len;
            for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
          }
        }
        offset += extents[t];
      }
    };
  });
}

std::vector<DiffTensor> split(const DiffTensor& x, std::span<const std::size_t> extents,
                              std::size_t axis) {
  check_axis("split", x, axis);
  std::size_t total = 0;
  for (std::size_t e : extents) {
    if (e == 0) throw DimensionError("split: zero extent");
    total += e;
  }
  if (total != x.dim(axis)) {
    throw DimensionError("split: extents sum to " + std::to_string(total) + ", axis has " +
                         std::to_string(x.dim(axis)));
  }
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<DiffTensor> parts;
  std::size_t offset = 0;
  for (std::size_t e : extents) {
    Shape s = x.shape();
    s[axis] = e;
    Tensor out(s);
    const std::size_t len = e * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* src = x.value().data().data() + o * v.n * v.inner + offset * v.inner;
      std::copy(src, src + len, out.data().data() + o * len);
    }
    const DiffTensor inputs[] = {x};
    parts.push_back(finish("split", inputs, std::move(out), [v, offset, len] {
      return [v, offset, len](const Tensor& up, Grads g) {
        if (g[0] == nullptr) return;
        for (std::size_t o = 0; o < v.outer; ++o) {
          double* dst = g[0]->data().data() + o * v.n * v.inner + offset * v.inner;
          const double* src = up.data().data() + o * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      };
    }));
    offset += e;
  }
  return parts;
}

DiffTensor gather_rows(const DiffTensor& x, std::span<const std::size_t> rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t r = x.dim(0), d = x.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= r) throw DimensionError("gather_rows: row index out of range");
    const double* src = x.value().data().data() + rows[i] * d;
    std::copy(src, src + d, out.data().data() + i * d);
  }
  auto idx = std::make_shared<const std::vector<std::size_t>>(rows.begin(), rows.end());
  const DiffTensor inputs[] = {x};
  return finish("gather_rows", inputs, std::move(out), [idx, d] {
    return [idx, d](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (std::size_t i = 0; i < idx->size(); ++i) {
        kernels::axpy(1.0, up.data().subspan(i * d, d), g[0]->data().subspan((*idx)[i] * d, d));
      }
    };
  });
}

// --- image ops ----------------------------------------------------------------

namespace {

// One kernel tap of a "same" dilated correlation restricted to valid pixels.
struct Tap {
  std::ptrdiff_t dy, dx;                 // input offset relative to output
  std::size_t y0, y1, x0, x1;            // output range [y0, y1) x [x0, x1)
};

Tap make_tap(std::size_t ky, std::size_t kx, std::size_t dilation, std::size_t pad, std::size_t h,
             std::size_t w) {
  Tap t{};
  t.dy = static_cast<std::ptrdiff_t>(ky * dilation) - static_cast<std::ptrdiff_t>(pad);
  t.dx = static_cast<std::ptrdiff_t>(kx * dilation) - static_cast<std::ptrdiff_t>(pad);
  auto lo = [](std::ptrdiff_t d) { return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -d)); };
  auto hi = [](std::ptrdiff_t d, std::size_t n) {
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - d, 0,
                                   static_cast<std::ptrdiff_t>(n)));
  };
  t.y0 = lo(t.dy);
  t.y1 = hi(t.dy, h);
  t.x0 = lo(t.dx);
  t.x1 = hi(t.dx, w);
  if (t.y1 < t.y0) t.y1 = t.y0;
  if (t.x1 < t.x0) t.x1 = t.x0;
  return t;
}

}  // namespace

DiffTensor depthwise_conv2d(const DiffTensor& x, const DiffTensor& kernel, std::size_t dilation) {
  require_rank("depthwise_conv2d", x, 3);
  require_rank("depthwise_conv2d", kernel, 3);
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2), k = kernel.dim(1);
  if (kernel.dim(2) != k) throw DimensionError("depthwise_conv2d: kernel must be square");
  if (k % 2 == 0) throw ParameterError("depthwise_conv2d: kernel size must be odd");
  if (dilation == 0) throw ParameterError("depthwise_conv2d: dilation must be positive");
  if (kernel.dim(0) != c) {
    throw DimensionError("depthwise_conv2d: kernel channels " + std::to_string(kernel.dim(0)) +
                         " != input channels " + std::to_string(c));
  }
  const std::size_t pad = (k - 1) * dilation / 2;
  const auto& kt = kernels::table(kernels::active_backend());
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* in = xv.data().data() + ch * h * w;
    double* o = out.data().data() + ch * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double wgt = kv[(ch * k + ky) * k + kx];
        const Tap t = make_tap(ky, kx, dilation, pad, h, w);
        if (t.x1 == t.x0) continue;
        for (std::size_t y = t.y0; y < t.y1; ++y) {
          const double* src = in + (static_cast<std::ptrdiff_t>(y) + t.dy) * static_cast<std::ptrdiff_t>(w) +
                              static_cast<std::ptrdiff_t>(t.x0) + t.dx;
          kt.axpy(wgt, src, o + y * w + t.x0, t.x1 - t.x0);
        }
      }
    }
  }
  const DiffTensor inputs[] = {x, kernel};
  return finish("depthwise_conv2d", inputs, std::move(out),
                [xs = x.shared_value(), ks = kernel.shared_value(), dilation, pad] {
                  return [xs, ks, dilation, pad](const Tensor& up, Grads g) {
                    const auto& kt = kernels::table(kernels::active_backend());
                    const std::size_t c = xs->dim(0), h = xs->dim(1), w = xs->dim(2);
                    const std::size_t k = ks->dim(1);
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      const double* u = up.data().data() + ch * h * w;
                      const double* in = xs->data().data() + ch * h * w;
                      for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                          const std::size_t kidx = (ch * k + ky) * k + kx;
                          const Tap t = make_tap(ky, kx, dilation, pad, h, w);
                          if (t.x1 == t.x0) continue;
                          const std::size_t len = t.x1 - t.x0;
                          for (std::size_t y = t.y0; y < t.y1; ++y) {
                            const std::ptrdiff_t src_off =
                                (static_cast<std::ptrdiff_t>(y) + t.dy) *
                                    static_cast<std::ptrdiff_t>(w) +
                                static_cast<std::ptrdiff_t>(t.x0) + t.dx;
                            if (g[0] != nullptr) {
                              kt.axpy((*ks)[kidx], u + y * w + t.x0,
                                      g[0]->data().data() + ch * h * w + src_off, len);
                            }
                            if (g[1] != nullptr) {
                              (*g[1])[kidx] += kt.dot(u + y * w + t.x0, in + src_off, len);
                            }
                          }
                        }
                      }
                    }
                  };
                });
}

DiffTensor pointwise_conv(const DiffTensor& x, const DiffTensor& w, std::size_t stride) {
  require_rank("pointwise_conv", x, 3);
  require_rank("pointwise_conv", w, 2);
  if (stride < 1) throw ParameterError("pointwise_conv: stride must be >= 1");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0);
  if (w.dim(1) != cin) {
    throw DimensionError("pointwise_conv: weight expects " + std::to_string(w.dim(1)) +
                         " input channels, got " + std::to_string(cin));
  }
  const std::size_t ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const std::size_t p = ho * wo;
  // Subsampled input [cin x p]; identity copy when stride == 1.
  auto xs = std::make_shared<Tensor>(Shape{cin, p});
  if (stride == 1) {
    std::copy(x.value().data().begin(), x.value().data().end(), xs->data().begin());
  } else {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t y = 0; y < ho; ++y) {
        for (std::size_t xx = 0; xx < wo; ++xx) {
          xs->at(c, y * wo + xx) = x.value().at(c, y * stride, xx * stride);
        }
      }
    }
  }
  const auto& kt = kernels::table(kernels::active_backend());
  Tensor out({cout, ho, wo});
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      kt.axpy(w.value().at(co, ci), xs->data().data() + ci * p, out.data().data() + co * p, p);
    }
  }
  const DiffTensor inputs[] = {x, w};
  return finish("pointwise_conv", inputs, std::move(out),
                [xsc = std::shared_ptr<const Tensor>(xs), ws = w.shared_value(), stride, h, wd] {
                  return [xsc, ws, stride, h, wd](const Tensor& up, Grads g) {
                    const auto& kt = kernels::table(kernels::active_backend());
                    const std::size_t cout = ws->dim(0), cin = ws->dim(1);
                    const std::size_t ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
                    const std::size_t p = ho * wo;
                    const double* u = up.data().data();
                    if (g[1] != nullptr) {
                      for (std::size_t co = 0; co < cout; ++co) {
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                          g[1]->at(co, ci) += kt.dot(u + co * p, xsc->data().data() + ci * p, p);
                        }
                      }
                    }
                    if (g[0] != nullptr) {
                      Tensor gs({cin, p});
                      for (std::size_t co = 0; co < cout; ++co) {
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                          kt.axpy(ws->at(co, ci), u + co * p, gs.data().data() + ci * p, p);
                        }
                      }
                      for (std::size_t c = 0; c < cin; ++c) {
                        for (std::size_t y = 0; y < ho; ++y) {
                          for (std::size_t xx = 0; xx < wo; ++xx) {
                            g[0]->at(c, y * stride, xx * stride) += gs.at(c, y * wo + xx);
                          }
                        }
                      }
                    }
                  };
                });
}

DiffTensor add_channel_bias(const DiffTensor& x, const DiffTensor& b) {
  require_rank("add_channel_bias", b, 1);
  const std::size_t c = x.dim(0);
  if (b.dim(0) != c) throw DimensionError("add_channel_bias: bias length != channel count");
  const std::size_t inner = x.size() / c;
  Tensor out = x.value();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < inner; ++i) out[ch * inner + i] += b.value()[ch];
  }
  const DiffTensor inputs[] = {x, b};
  return finish("add_channel_bias", inputs, std::move(out), [c, inner] {
    return [c, inner](const Tensor& up, Grads g) {
      if (g[0] != nullptr) *g[0] += up;
      if (g[1] != nullptr) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double s = 0.0;
          for (std::size_t i = 0; i < inner; ++i) s += up[ch * inner + i];
          (*g[1])[ch] += s;
        }
      }
    };
  });
}

DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain, const DiffTensor& bias,
                      double eps) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  if (x.shape().size() < 2) throw DimensionError("layer_norm: input must be [C x ...]");
  require_rank("layer_norm", gain, 1);
  require_rank("layer_norm", bias, 1);
  const std::size_t c = x.dim(0), p = x.size() / c;
  if (gain.dim(0) != c || bias.dim(0) != c) {
    throw DimensionError("layer_norm: gain/bias length != channel count");
  }
  const Tensor& xv = x.value();
  auto xhat = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(p);
  std::vector<double> mean(p, 0.0), var(p, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < p; ++i) mean[i] += xv[ch * p + i];
  }
  for (double& m : mean) m /= static_cast<double>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < p; ++i) {
      const double d = xv[ch * p + i] - mean[i];
      var[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < p; ++i) (*inv_std)[i] = 1.0 / std::sqrt(var[i] / static_cast<double>(c) + eps);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < p; ++i) {
      const double n = (xv[ch * p + i] - mean[i]) * (*inv_std)[i];
      (*xhat)[ch * p + i] = n;
      out[ch * p + i] = gain.value()[ch] * n + bias.value()[ch];
    }
  }
  const DiffTensor inputs[] = {x, gain, bias};
  return finish("layer_norm", inputs, std::move(out),
                [xh = std::shared_ptr<const Tensor>(xhat),
                 is = std::shared_ptr<const std::vector<double>>(inv_std), gs = gain.shared_value(),
                 c, p] {
                  return [xh, is, gs, c, p](const Tensor& up, Grads g) {
                    if (g[1] != nullptr || g[2] != nullptr) {
                      for (std::size_t ch = 0; ch < c; ++ch) {
                        double sg = 0.0, sb = 0.0;
                        for (std::size_t i = 0; i < p; ++i) {
                          sg += up[ch * p + i] * (*xh)[ch * p + i];
                          sb += up[ch * p + i];
                        }
                        if (g[1] != nullptr) (*g[1])[ch] += sg;
                        if (g[2] != nullptr) (*g[2])[ch] += sb;
                      }
                    }
                    if (g[0] == nullptr) return;
                    std::vector<double> s1(p, 0.0), s2(p, 0.0);
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      for (std::size_t i = 0; i < p; ++i) {
                        const double d = up[ch * p + i] * (*gs)[ch];
                        s1[i] += d;
                        s2[i] += d * (*xh)[ch * p + i];
                      }
                    }
                    const double inv_c = 1.0 / static_cast<double>(c);
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      for (std::size_t i = 0; i < p; ++i) {
                        const double d = up[ch * p + i] * (*gs)[ch];
                        (*g[0])[ch * p + i] +=
                            (*is)[i] * (d - inv_c * s1[i] - (*xh)[ch * p + i] * inv_c * s2[i]);
                      }
                    }
                  };
                });
}

DiffTensor upsample_nearest(const DiffTensor& x, std::size_t factor) {
  require_rank("upsample_nearest", x, 3);
  if (factor < 1) throw ParameterError("upsample_nearest: factor must be >= 1");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h * factor, w * factor});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h * factor; ++y) {
      for (std::size_t xx = 0; xx < w * factor; ++xx) {
        out.at(ch, y, xx) = x.value().at(ch, y / factor, xx / factor);
      }
    }
  }
  const DiffTensor inputs[] = {x};
  return finish("upsample_nearest", inputs, std::move(out), [c, h, w, factor] {
    return [c, h, w, factor](const Tensor& up, Grads g) {
      if (g[0] == nullptr) return;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h * factor; ++y) {
          for (std::size_t xx = 0; xx < w * factor; ++xx) {
            g[0]->at(ch, y / factor, xx / factor) += up.at(ch, y, xx);
          }
        }
      }
    };
  });
}

}  // namespace nlos::ops
