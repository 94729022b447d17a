#include "vqad/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "vqad/autodiff/gemm.hpp"
#include "vqad/error.hpp"

namespace vqad::ad {
namespace {

template <typename T>
BasicGraph<T>& graph_of(BasicVar<T> a, std::string_view op) {
  if (!a.valid()) throw UsageError(std::string(op) + ": null operand");
  return *a.graph();
}

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw UsageError(std::string(op) + ": shape mismatch, " + detail);
}

template <typename T>
void require_same(std::string_view op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(std::string_view op, const BasicTensor<T>& t, std::size_t rank) {
  if (t.rank() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

// Gradient slot of input k, or nullptr when that input does not need one.
template <typename T>
BasicTensor<T>* input_grad(BasicGraph<T>& g, std::size_t self, std::size_t k) {
  const std::size_t in = g.input(self, k);
  return g.requires_grad(in) ? &g.grad_accumulator(in) : nullptr;
}

template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_h,
            std::size_t out_w, T* cols) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        T* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(height) &&
                                ix < static_cast<long>(width);
            row[oy * out_w + ox] = inside ? img[(c * height + iy) * width + ix] : 0.0f;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_h,
            std::size_t out_w, T* img) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kernel; ++ky) {
      for (std::size_t kx = 0; kx < kernel; ++kx) {
        const T* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          if (iy < 0 || iy >= static_cast<long>(height)) continue;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
            if (ix < 0 || ix >= static_cast<long>(width)) continue;
            img[(c * height + iy) * width + ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

template <typename T, typename F, typename D>
BasicVar<T> unary(BasicVar<T> a, std::string_view op, F forward, D derivative) {
  BasicGraph<T>& g = graph_of(a, op);
  const BasicTensor<T>& x = g.value(a);
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return g.record(op, std::move(y), {a}, [derivative](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& gy = gr.out_grad(self);
    const BasicTensor<T>& xv = gr.value(gr.input(self, 0));
    BasicTensor<T>& gx = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += gy[i] * derivative(xv[i]);
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b) {
  BasicGraph<T>& g = graph_of(a, "add");
  const BasicTensor<T>& x = g.value(a);
  const BasicTensor<T>& y = g.value(b);
  require_same("add", x, y);
  BasicTensor<T> out = x;
  out.accumulate(y);
  return g.record("add", std::move(out), {a, b}, [](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    if (auto* ga = input_grad(gr, self, 0)) ga->accumulate(go);
    if (auto* gb = input_grad(gr, self, 1)) gb->accumulate(go);
  });
}

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b) {
  BasicGraph<T>& g = graph_of(a, "sub");
  const BasicTensor<T>& x = g.value(a);
  const BasicTensor<T>& y = g.value(b);
  require_same("sub", x, y);
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return g.record("sub", std::move(out), {a, b}, [](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    if (auto* ga = input_grad(gr, self, 0)) ga->accumulate(go);
    if (auto* gb = input_grad(gr, self, 1)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] -= go[i];
    }
  });
}

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b) {
  BasicGraph<T>& g = graph_of(a, "mul");
  const BasicTensor<T>& x = g.value(a);
  const BasicTensor<T>& y = g.value(b);
  require_same("mul", x, y);
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return g.record("mul", std::move(out), {a, b}, [](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    const BasicTensor<T>& xv = gr.value(gr.input(self, 0));
    const BasicTensor<T>& yv = gr.value(gr.input(self, 1));
    if (auto* ga = input_grad(gr, self, 0)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * yv[i];
    }
    if (auto* gb = input_grad(gr, self, 1)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * xv[i];
    }
  });
}

template <typename T>
BasicVar<T> scale(BasicVar<T> a, std::type_identity_t<T> factor) {
  BasicGraph<T>& g = graph_of(a, "scale");
  const BasicTensor<T>& x = g.value(a);
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return g.record("scale", std::move(out), {a}, [factor](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * factor;
  });
}

template <typename T>
BasicVar<T> add_bias(BasicVar<T> x, BasicVar<T> bias) {
  BasicGraph<T>& g = graph_of(x, "add_bias");
  const BasicTensor<T>& xv = g.value(x);
  const BasicTensor<T>& bv = g.value(bias);
  require_rank("add_bias", xv, 2);
  if (bv.size() != xv.dim(1)) {
    shape_error("add_bias", shape_string(xv.shape()) + " + " + shape_string(bv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  BasicTensor<T> out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  return g.record("add_bias", std::move(out), {x, bias}, [rows, cols](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    if (auto* gx = input_grad(gr, self, 0)) gx->accumulate(go);
    if (auto* gb = input_grad(gr, self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += go[r * cols + c];
      }
    }
  });
}

template <typename T>
BasicVar<T> add_tiled(BasicVar<T> x, BasicVar<T> rows) {
  BasicGraph<T>& g = graph_of(x, "add_tiled");
  const BasicTensor<T>& xv = g.value(x);
  const BasicTensor<T>& rv = g.value(rows);
  require_rank("add_tiled", xv, 2);
  require_rank("add_tiled", rv, 2);
  if (rv.dim(1) != xv.dim(1) || rv.dim(0) == 0 || xv.dim(0) % rv.dim(0) != 0) {
    shape_error("add_tiled", shape_string(xv.shape()) + " + " + shape_string(rv.shape()));
  }
  const std::size_t block = rv.size();
  BasicTensor<T> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rv[i % block];
  return g.record("add_tiled", std::move(out), {x, rows}, [block](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    if (auto* gx = input_grad(gr, self, 0)) gx->accumulate(go);
    if (auto* gr_rows = input_grad(gr, self, 1)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*gr_rows)[i % block] += go[i];
    }
  });
}

template <typename T>
BasicVar<T> matmul(BasicVar<T> a, BasicVar<T> b) {
  BasicGraph<T>& g = graph_of(a, "matmul");
  const BasicTensor<T>& x = g.value(a);
  const BasicTensor<T>& y = g.value(b);
  require_rank("matmul", x, 2);
  require_rank("matmul", y, 2);
  if (x.dim(1) != y.dim(0)) {
    shape_error("matmul", "inner extents " + shape_string(x.shape()) + " x " + shape_string(y.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  BasicTensor<T> out({m, n});
  gemm_nn(m, n, k, x.raw(), y.raw(), out.raw());
  return g.record("matmul", std::move(out), {a, b}, [m, n, k](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    const BasicTensor<T>& xv = gr.value(gr.input(self, 0));
    const BasicTensor<T>& yv = gr.value(gr.input(self, 1));
    if (auto* ga = input_grad(gr, self, 0)) gemm_nt(m, k, n, go.raw(), yv.raw(), ga->raw());
    if (auto* gb = input_grad(gr, self, 1)) gemm_tn(k, n, m, xv.raw(), go.raw(), gb->raw());
  });
}

template <typename T>
BasicVar<T> transpose(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "transpose");
  const BasicTensor<T>& x = g.value(a);
  require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  BasicTensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  return g.record("transpose", std::move(out), {a}, [r, c](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
    }
  });
}

template <typename T>
BasicVar<T> reshape(BasicVar<T> a, Shape shape) {
  BasicGraph<T>& g = graph_of(a, "reshape");
  const BasicTensor<T>& x = g.value(a);
  if (shape_size(shape) != x.size()) {
    shape_error("reshape", shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  BasicTensor<T> out = x.reshaped(std::move(shape));
  return g.record("reshape", std::move(out), {a}, [](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

template <typename T>
BasicVar<T> relu(BasicVar<T> a) {
  return unary(
      a, "relu", [](T v) { return v > 0.0f ? v : 0.0f; },
      [](T v) { return v > 0.0f ? 1.0f : 0.0f; });
}

template <typename T>
BasicVar<T> gelu(BasicVar<T> a) {
  return unary(
      a, "gelu",
      [](T v) {
        const T inner = T(kGeluC) * (v + T(kGeluA) * v * v * v);
        return 0.5f * v * (1.0f + std::tanh(inner));
      },
      [](T v) {
        const T inner = T(kGeluC) * (v + T(kGeluA) * v * v * v);
        const T th = std::tanh(inner);
        return 0.5f * (1.0f + th) +
               0.5f * v * (1.0f - th * th) * T(kGeluC) * (1.0f + 3.0f * T(kGeluA) * v * v);
      });
}

template <typename T>
BasicVar<T> softmax(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "softmax");
  const BasicTensor<T>& x = g.value(a);
  if (x.rank() == 0 || x.size() == 0) shape_error("softmax", "empty operand");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.raw() + r * cols;
    T* o = out.raw() + r * cols;
    const T peak = *std::max_element(in, in + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(static_cast<double>(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = static_cast<T>(std::exp(static_cast<double>(in[c] - peak)) / total);
    }
  }
  return g.record("softmax", std::move(out), {a}, [rows, cols](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    const BasicTensor<T>& y = gr.value(self);
    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += static_cast<double>(go[base + c]) * y[base + c];
      for (std::size_t c = 0; c < cols; ++c) {
        ga[base + c] += static_cast<T>(y[base + c] * (go[base + c] - dot));
      }
    }
  });
}

template <typename T>
BasicVar<T> layer_norm(BasicVar<T> x, BasicVar<T> gain, BasicVar<T> bias, std::type_identity_t<T> eps) {
  BasicGraph<T>& g = graph_of(x, "layer_norm");
  const BasicTensor<T>& xv = g.value(x);
  const BasicTensor<T>& gv = g.value(gain);
  const BasicTensor<T>& bv = g.value(bias);
  require_rank("layer_norm", xv, 2);
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (gv.size() != cols || bv.size() != cols) {
    shape_error("layer_norm", shape_string(xv.shape()) + " with gain " + shape_string(gv.shape()) +
                                  " bias " + shape_string(bv.shape()));
  }
  BasicTensor<T> out(xv.shape());
  std::vector<double> normalized(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.raw() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (in[c] - mu) * inv_std[r];
      normalized[r * cols + c] = xhat;
      out[r * cols + c] = static_cast<T>(xhat * gv[c] + bv[c]);
    }
  }
  return g.record(
      "layer_norm", std::move(out), {x, gain, bias},
      [rows, cols, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          BasicGraph<T>& gr, std::size_t self) {
        const BasicTensor<T>& go = gr.out_grad(self);
        const BasicTensor<T>& gain_v = gr.value(gr.input(self, 1));
        BasicTensor<T>* gx = input_grad(gr, self, 0);
        BasicTensor<T>* gg = input_grad(gr, self, 1);
        BasicTensor<T>* gb = input_grad(gr, self, 2);
        std::vector<double> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t base = r * cols;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dxhat[c] = static_cast<double>(go[base + c]) * gain_v[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * normalized[base + c];
            if (gg) (*gg)[c] += static_cast<T>(go[base + c] * normalized[base + c]);
            if (gb) (*gb)[c] += go[base + c];
          }
          mean_d /= static_cast<double>(cols);
          mean_dx /= static_cast<double>(cols);
          if (gx) {
            for (std::size_t c = 0; c < cols; ++c) {
              (*gx)[base + c] += static_cast<T>(
                  inv_std[r] * (dxhat[c] - mean_d - normalized[base + c] * mean_dx));
            }
          }
        }
      });
}

template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> w, BasicVar<T> b, std::size_t stride, std::size_t pad) {
  BasicGraph<T>& g = graph_of(x, "conv2d");
  const BasicTensor<T>& xv = g.value(x);
  const BasicTensor<T>& wv = g.value(w);
  const BasicTensor<T>& bv = g.value(b);
  require_rank("conv2d", xv, 4);
  require_rank("conv2d", wv, 4);
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), height = xv.dim(2), width = xv.dim(3);
  const std::size_t out_c = wv.dim(0), kernel = wv.dim(2);
  if (wv.dim(1) != channels || wv.dim(3) != kernel || bv.size() != out_c || stride == 0 ||
      height + 2 * pad < kernel || width + 2 * pad < kernel) {
    shape_error("conv2d", "input " + shape_string(xv.shape()) + " weight " +
                              shape_string(wv.shape()) + " bias " + shape_string(bv.shape()));
  }
  const std::size_t out_h = (height + 2 * pad - kernel) / stride + 1;
  const std::size_t out_w = (width + 2 * pad - kernel) / stride + 1;
  const std::size_t patch = channels * kernel * kernel;
  const std::size_t plane = out_h * out_w;
  BasicTensor<T> out({batch, out_c, out_h, out_w});
  std::vector<T> cols(batch * patch * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    T* col = cols.data() + n * patch * plane;
    im2col(xv.raw() + n * channels * height * width, channels, height, width, kernel, stride, pad,
           out_h, out_w, col);
    T* o = out.raw() + n * out_c * plane;
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      std::fill(o + oc * plane, o + (oc + 1) * plane, bv[oc]);
    }
    gemm_nn(out_c, plane, patch, wv.raw(), col, o);
  }
  return g.record(
      "conv2d", std::move(out), {x, w, b},
      [=, cols = std::move(cols)](BasicGraph<T>& gr, std::size_t self) {
        const BasicTensor<T>& go = gr.out_grad(self);
        const BasicTensor<T>& weight = gr.value(gr.input(self, 1));
        BasicTensor<T>* gx = input_grad(gr, self, 0);
        BasicTensor<T>* gw = input_grad(gr, self, 1);
        BasicTensor<T>* gb = input_grad(gr, self, 2);
        std::vector<T> dcol(patch * plane);
        for (std::size_t n = 0; n < batch; ++n) {
          const T* dout = go.raw() + n * out_c * plane;
          if (gw) gemm_nt(out_c, patch, plane, dout, cols.data() + n * patch * plane, gw->raw());
          if (gb) {
            for (std::size_t oc = 0; oc < out_c; ++oc) {
              T s = 0.0f;
              for (std::size_t p = 0; p < plane; ++p) s += dout[oc * plane + p];
              (*gb)[oc] += s;
            }
          }
          if (gx) {
            std::fill(dcol.begin(), dcol.end(), 0.0f);
            gemm_tn(patch, plane, out_c, weight.raw(), dout, dcol.data());
            col2im(dcol.data(), channels, height, width, kernel, stride, pad, out_h, out_w,
                   gx->raw() + n * channels * height * width);
          }
        }
      });
}

template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> x, BasicVar<T> w, BasicVar<T> b, std::size_t stride, std::size_t pad) {
  BasicGraph<T>& g = graph_of(x, "conv_transpose2d");
  const BasicTensor<T>& xv = g.value(x);
  const BasicTensor<T>& wv = g.value(w);
  const BasicTensor<T>& bv = g.value(b);
  require_rank("conv_transpose2d", xv, 4);
  require_rank("conv_transpose2d", wv, 4);
  const std::size_t batch = xv.dim(0), in_c = xv.dim(1), height = xv.dim(2), width = xv.dim(3);
  const std::size_t out_c = wv.dim(1), kernel = wv.dim(2);
  if (wv.dim(0) != in_c || wv.dim(3) != kernel || bv.size() != out_c || stride == 0 || height == 0 ||
      width == 0 || (height - 1) * stride + kernel < 2 * pad + 1 ||
      (width - 1) * stride + kernel < 2 * pad + 1) {
    shape_error("conv_transpose2d", "input " + shape_string(xv.shape()) + " weight " +
                                        shape_string(wv.shape()) + " bias " + shape_string(bv.shape()));
  }
  const std::size_t out_h = (height - 1) * stride + kernel - 2 * pad;
  const std::size_t out_w = (width - 1) * stride + kernel - 2 * pad;
  const std::size_t patch = out_c * kernel * kernel;
  const std::size_t plane = height * width;
  const std::size_t out_plane = out_h * out_w;
  BasicTensor<T> out({batch, out_c, out_h, out_w});
  std::vector<T> col(patch * plane);
  for (std::size_t n = 0; n < batch; ++n) {
    std::fill(col.begin(), col.end(), 0.0f);
    gemm_tn(patch, plane, in_c, wv.raw(), xv.raw() + n * in_c * plane, col.data());
    T* o = out.raw() + n * out_c * out_plane;
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      std::fill(o + oc * out_plane, o + (oc + 1) * out_plane, bv[oc]);
    }
    col2im(col.data(), out_c, out_h, out_w, kernel, stride, pad, height, width, o);
  }
  return g.record("conv_transpose2d", std::move(out), {x, w, b}, [=](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    const BasicTensor<T>& input = gr.value(gr.input(self, 0));
    const BasicTensor<T>& weight = gr.value(gr.input(self, 1));
    BasicTensor<T>* gx = input_grad(gr, self, 0);
    BasicTensor<T>* gw = input_grad(gr, self, 1);
    BasicTensor<T>* gb = input_grad(gr, self, 2);
    std::vector<T> dcol(patch * plane);
    for (std::size_t n = 0; n < batch; ++n) {
      const T* dout = go.raw() + n * out_c * out_plane;
      im2col(dout, out_c, out_h, out_w, kernel, stride, pad, height, width, dcol.data());
      if (gx) gemm_nn(in_c, plane, patch, weight.raw(), dcol.data(), gx->raw() + n * in_c * plane);
      if (gw) gemm_nt(in_c, patch, plane, input.raw() + n * in_c * plane, dcol.data(), gw->raw());
      if (gb) {
        for (std::size_t oc = 0; oc < out_c; ++oc) {
          T s = 0.0f;
          for (std::size_t p = 0; p < out_plane; ++p) s += dout[oc * out_plane + p];
          (*gb)[oc] += s;
        }
      }
    }
  });
}

template <typename T>
BasicVar<T> embedding(BasicVar<T> table, std::span<const std::int32_t> ids) {
  BasicGraph<T>& g = graph_of(table, "embedding");
  const BasicTensor<T>& tv = g.value(table);
  require_rank("embedding", tv, 2);
  const std::size_t vocab = tv.dim(0), dim = tv.dim(1);
  BasicTensor<T> out({ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw UsageError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.raw() + ids[i] * dim, dim, out.raw() + i * dim);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return g.record("embedding", std::move(out), {table},
                  [dim, saved = std::move(saved)](BasicGraph<T>& gr, std::size_t self) {
                    const BasicTensor<T>& go = gr.out_grad(self);
                    BasicTensor<T>& gt = gr.grad_accumulator(gr.input(self, 0));
                    for (std::size_t i = 0; i < saved.size(); ++i) {
                      T* dst = gt.raw() + saved[i] * dim;
                      const T* src = go.raw() + i * dim;
                      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
                    }
                  });
}

template <typename T>
BasicVar<T> stop_gradient(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "stop_gradient");
  return g.record_detached("stop_gradient", g.value(a));
}

template <typename T>
BasicVar<T> straight_through(BasicVar<T> encoded, BasicVar<T> quantized) {
  BasicGraph<T>& g = graph_of(encoded, "straight_through");
  const BasicTensor<T>& ev = g.value(encoded);
  const BasicTensor<T>& qv = g.value(quantized);
  require_same("straight_through", ev, qv);
  return g.record("straight_through", qv, {encoded, quantized}, [](BasicGraph<T>& gr, std::size_t self) {
    if (auto* ge = input_grad(gr, self, 0)) ge->accumulate(gr.out_grad(self));
  });
}

template <typename T>
BasicVar<T> masked_cross_entropy(BasicVar<T> logits, std::span<const std::int32_t> targets,
                         std::span<const float> weights) {
  BasicGraph<T>& g = graph_of(logits, "masked_cross_entropy");
  const BasicTensor<T>& lv = g.value(logits);
  require_rank("masked_cross_entropy", lv, 2);
  const std::size_t rows = lv.dim(0), cols = lv.dim(1);
  if (targets.size() != rows || weights.size() != rows) {
    shape_error("masked_cross_entropy", "logits " + shape_string(lv.shape()) + " with " +
                                            std::to_string(targets.size()) + " targets and " +
                                            std::to_string(weights.size()) + " weights");
  }
  std::vector<T> probs(rows * cols, 0.0f);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (weights[r] == 0.0f) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols) {
      throw UsageError("masked_cross_entropy: target " + std::to_string(targets[r]) +
                       " outside " + std::to_string(cols) + " classes");
    }
    const T* in = lv.raw() + r * cols;
    const T peak = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(static_cast<double>(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] = static_cast<T>(std::exp(static_cast<double>(in[c] - peak)) / z);
    }
    const double log_p = static_cast<double>(in[targets[r]] - peak) - std::log(z);
    total -= weights[r] * log_p;
  }
  std::vector<std::int32_t> saved_targets(targets.begin(), targets.end());
  std::vector<T> saved_weights(weights.begin(), weights.end());
  return g.record("masked_cross_entropy", BasicTensor<T>::scalar(static_cast<T>(total)), {logits},
                  [rows, cols, probs = std::move(probs), saved_targets = std::move(saved_targets),
                   saved_weights = std::move(saved_weights)](BasicGraph<T>& gr, std::size_t self) {
                    const T go = gr.out_grad(self)[0];
                    BasicTensor<T>& gl = gr.grad_accumulator(gr.input(self, 0));
                    for (std::size_t r = 0; r < rows; ++r) {
                      const T wgt = saved_weights[r];
                      if (wgt == 0.0f) continue;
                      T* dst = gl.raw() + r * cols;
                      const T* p = probs.data() + r * cols;
                      for (std::size_t c = 0; c < cols; ++c) dst[c] += go * wgt * p[c];
                      dst[saved_targets[r]] -= go * wgt;
                    }
                  });
}

namespace {

struct AttentionLayout {
  std::size_t batch, heads, seq, width, head_dim;
};

template <typename T>
AttentionLayout attention_layout(std::string_view op, const BasicTensor<T>& q, const BasicTensor<T>& k,
                                 std::size_t batch, std::size_t heads) {
  require_rank(op, q, 2);
  require_same(op, q, k);
  if (batch == 0 || heads == 0 || q.dim(0) % batch != 0 || q.dim(1) % heads != 0) {
    shape_error(op, shape_string(q.shape()) + " with batch " + std::to_string(batch) +
                        " heads " + std::to_string(heads));
  }
  return {batch, heads, q.dim(0) / batch, q.dim(1), q.dim(1) / heads};
}

// Copies head h of sequence b out of a row-stacked [batch*seq, width] matrix.
template <typename T>
void gather_head(const T* src, const AttentionLayout& a, std::size_t b, std::size_t h, T* dst) {
  for (std::size_t i = 0; i < a.seq; ++i) {
    std::copy_n(src + (b * a.seq + i) * a.width + h * a.head_dim, a.head_dim, dst + i * a.head_dim);
  }
}

template <typename T>
void scatter_head_add(const T* src, const AttentionLayout& a, std::size_t b, std::size_t h,
                      T* dst) {
  for (std::size_t i = 0; i < a.seq; ++i) {
    T* row = dst + (b * a.seq + i) * a.width + h * a.head_dim;
    for (std::size_t d = 0; d < a.head_dim; ++d) row[d] += src[i * a.head_dim + d];
  }
}

// Row-wise softmax of q k^T / sqrt(d_k) for one (sequence, head) pair.
template <typename T>
void head_probabilities(const T* qh, const T* kh, const AttentionLayout& a, bool causal,
                        T* probs) {
  const T inv_scale = 1.0f / std::sqrt(static_cast<T>(a.head_dim));
  std::fill(probs, probs + a.seq * a.seq, 0.0f);
  gemm_nt(a.seq, a.seq, a.head_dim, qh, kh, probs);
  for (std::size_t i = 0; i < a.seq; ++i) {
    T* row = probs + i * a.seq;
    const std::size_t visible = causal ? i + 1 : a.seq;
    T peak = row[0] * inv_scale;
    for (std::size_t j = 0; j < visible; ++j) peak = std::max(peak, row[j] * inv_scale);
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) total += std::exp(static_cast<double>(row[j] * inv_scale - peak));
    for (std::size_t j = 0; j < visible; ++j) {
      row[j] = static_cast<T>(std::exp(static_cast<double>(row[j] * inv_scale - peak)) / total);
    }
    for (std::size_t j = visible; j < a.seq; ++j) row[j] = 0.0f;
  }
}

}  // namespace

template <typename T>
BasicTensor<T> attention_probabilities(const BasicTensor<T>& q, const BasicTensor<T>& k, std::size_t batch,
                               std::size_t heads, bool causal) {
  const AttentionLayout a = attention_layout("attention_probabilities", q, k, batch, heads);
  BasicTensor<T> probs({a.batch * a.heads * a.seq, a.seq});
  std::vector<T> qh(a.seq * a.head_dim), kh(a.seq * a.head_dim);
  for (std::size_t b = 0; b < a.batch; ++b) {
    for (std::size_t h = 0; h < a.heads; ++h) {
      gather_head(q.raw(), a, b, h, qh.data());
      gather_head(k.raw(), a, b, h, kh.data());
      head_probabilities(qh.data(), kh.data(), a, causal,
                         probs.raw() + (b * a.heads + h) * a.seq * a.seq);
    }
  }
  return probs;
}

template <typename T>
BasicVar<T> attention(BasicVar<T> q, BasicVar<T> k, BasicVar<T> v, std::size_t batch, std::size_t heads, bool causal) {
  BasicGraph<T>& g = graph_of(q, "attention");
  const BasicTensor<T>& qv = g.value(q);
  const BasicTensor<T>& kv = g.value(k);
  const BasicTensor<T>& vv = g.value(v);
  const AttentionLayout a = attention_layout("attention", qv, kv, batch, heads);
  require_same("attention", qv, vv);
  const std::size_t block = a.seq * a.head_dim;
  BasicTensor<T> probs = attention_probabilities(qv, kv, batch, heads, causal);
  BasicTensor<T> out(qv.shape());
  std::vector<T> vh(block), oh(block);
  for (std::size_t b = 0; b < a.batch; ++b) {
    for (std::size_t h = 0; h < a.heads; ++h) {
      gather_head(vv.raw(), a, b, h, vh.data());
      std::fill(oh.begin(), oh.end(), 0.0f);
      gemm_nn(a.seq, a.head_dim, a.seq, probs.raw() + (b * a.heads + h) * a.seq * a.seq, vh.data(),
              oh.data());
      scatter_head_add(oh.data(), a, b, h, out.raw());
    }
  }
  return g.record(
      "attention", std::move(out), {q, k, v},
      [a, block, probs = std::move(probs)](BasicGraph<T>& gr, std::size_t self) {
        const BasicTensor<T>& go = gr.out_grad(self);
        const BasicTensor<T>& qval = gr.value(gr.input(self, 0));
        const BasicTensor<T>& kval = gr.value(gr.input(self, 1));
        const BasicTensor<T>& vval = gr.value(gr.input(self, 2));
        BasicTensor<T>* gq = input_grad(gr, self, 0);
        BasicTensor<T>* gk = input_grad(gr, self, 1);
        BasicTensor<T>* gv = input_grad(gr, self, 2);
        const T inv_scale = 1.0f / std::sqrt(static_cast<T>(a.head_dim));
        std::vector<T> qh(block), kh(block), vh(block), doh(block), dtmp(block);
        std::vector<T> dp(a.seq * a.seq);
        for (std::size_t b = 0; b < a.batch; ++b) {
          for (std::size_t h = 0; h < a.heads; ++h) {
            const T* p = probs.raw() + (b * a.heads + h) * a.seq * a.seq;
            gather_head(go.raw(), a, b, h, doh.data());
            gather_head(vval.raw(), a, b, h, vh.data());
            if (gv) {
              std::fill(dtmp.begin(), dtmp.end(), 0.0f);
              gemm_tn(a.seq, a.head_dim, a.seq, p, doh.data(), dtmp.data());
              scatter_head_add(dtmp.data(), a, b, h, gv->raw());
            }
            if (!gq && !gk) continue;
            std::fill(dp.begin(), dp.end(), 0.0f);
            gemm_nt(a.seq, a.seq, a.head_dim, doh.data(), vh.data(), dp.data());
            // dS = P * (dP - rowsum(dP * P)), folded with the 1/sqrt(d_k) factor.
            for (std::size_t i = 0; i < a.seq; ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < a.seq; ++j) dot += static_cast<double>(dp[i * a.seq + j]) * p[i * a.seq + j];
              for (std::size_t j = 0; j < a.seq; ++j) {
                dp[i * a.seq + j] =
                    static_cast<T>(p[i * a.seq + j] * (dp[i * a.seq + j] - dot)) * inv_scale;
              }
            }
            gather_head(qval.raw(), a, b, h, qh.data());
            gather_head(kval.raw(), a, b, h, kh.data());
            if (gq) {
              std::fill(dtmp.begin(), dtmp.end(), 0.0f);
              gemm_nn(a.seq, a.head_dim, a.seq, dp.data(), kh.data(), dtmp.data());
              scatter_head_add(dtmp.data(), a, b, h, gq->raw());
            }
            if (gk) {
              std::fill(dtmp.begin(), dtmp.end(), 0.0f);
              gemm_tn(a.seq, a.head_dim, a.seq, dp.data(), qh.data(), dtmp.data());
              scatter_head_add(dtmp.data(), a, b, h, gk->raw());
            }
          }
        }
      });
}

template <typename T>
BasicVar<T> sum(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "sum");
  const BasicTensor<T>& x = g.value(a);
  double total = 0.0;
  for (T v : x.data()) total += v;
  return g.record("sum", BasicTensor<T>::scalar(static_cast<T>(total)), {a}, [](BasicGraph<T>& gr, std::size_t self) {
    const T go = gr.out_grad(self)[0];
    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
  });
}

template <typename T>
BasicVar<T> mean(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "mean");
  const BasicTensor<T>& x = g.value(a);
  if (x.size() == 0) shape_error("mean", "empty operand");
  double total = 0.0;
  for (T v : x.data()) total += v;
  const T inv = 1.0f / static_cast<T>(x.size());
  return g.record("mean", BasicTensor<T>::scalar(static_cast<T>(total / x.size())), {a},
                  [inv](BasicGraph<T>& gr, std::size_t self) {
                    const T go = gr.out_grad(self)[0] * inv;
                    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
                  });
}

template <typename T>
BasicVar<T> sum_squares(BasicVar<T> a) {
  BasicGraph<T>& g = graph_of(a, "sum_squares");
  const BasicTensor<T>& x = g.value(a);
  double total = 0.0;
  for (T v : x.data()) total += static_cast<double>(v) * v;
  return g.record("sum_squares", BasicTensor<T>::scalar(static_cast<T>(total)), {a},
                  [](BasicGraph<T>& gr, std::size_t self) {
                    const T go = gr.out_grad(self)[0];
                    const BasicTensor<T>& xv = gr.value(gr.input(self, 0));
                    BasicTensor<T>& ga = gr.grad_accumulator(gr.input(self, 0));
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0f * go * xv[i];
                  });
}

template <typename T>
BasicVar<T> mse(BasicVar<T> a, BasicVar<T> b) {
  BasicGraph<T>& g = graph_of(a, "mse");
  const BasicTensor<T>& x = g.value(a);
  const BasicTensor<T>& y = g.value(b);
  require_same("mse", x, y);
  if (x.size() == 0) shape_error("mse", "empty operands");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    total += d * d;
  }
  const T n = static_cast<T>(x.size());
  return g.record("mse", BasicTensor<T>::scalar(static_cast<T>(total / x.size())), {a, b},
                  [n](BasicGraph<T>& gr, std::size_t self) {
                    const T go = gr.out_grad(self)[0];
                    const BasicTensor<T>& xv = gr.value(gr.input(self, 0));
                    const BasicTensor<T>& yv = gr.value(gr.input(self, 1));
                    BasicTensor<T>* ga = input_grad(gr, self, 0);
                    BasicTensor<T>* gb = input_grad(gr, self, 1);
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                      const T d = 2.0f * go * (xv[i] - yv[i]) / n;
                      if (ga) (*ga)[i] += d;
                      if (gb) (*gb)[i] -= d;
                    }
                  });
}

template <typename T>
BasicVar<T> nchw_to_rows(BasicVar<T> x) {
  BasicGraph<T>& g = graph_of(x, "nchw_to_rows");
  const BasicTensor<T>& xv = g.value(x);
  require_rank("nchw_to_rows", xv, 4);
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), plane = xv.dim(2) * xv.dim(3);
  BasicTensor<T> out({batch * plane, channels});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        out[(n * plane + p) * channels + c] = xv[(n * channels + c) * plane + p];
      }
    }
  }
  return g.record("nchw_to_rows", std::move(out), {x}, [=](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    BasicTensor<T>& gx = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          gx[(n * channels + c) * plane + p] += go[(n * plane + p) * channels + c];
        }
      }
    }
  });
}

template <typename T>
BasicVar<T> rows_to_nchw(BasicVar<T> x, std::size_t batch, std::size_t height, std::size_t width) {
  BasicGraph<T>& g = graph_of(x, "rows_to_nchw");
  const BasicTensor<T>& xv = g.value(x);
  require_rank("rows_to_nchw", xv, 2);
  const std::size_t plane = height * width, channels = xv.dim(1);
  if (xv.dim(0) != batch * plane) {
    shape_error("rows_to_nchw", shape_string(xv.shape()) + " into " + std::to_string(batch) + "x" +
                                    std::to_string(height) + "x" + std::to_string(width));
  }
  BasicTensor<T> out({batch, channels, height, width});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        out[(n * channels + c) * plane + p] = xv[(n * plane + p) * channels + c];
      }
    }
  }
  return g.record("rows_to_nchw", std::move(out), {x}, [=](BasicGraph<T>& gr, std::size_t self) {
    const BasicTensor<T>& go = gr.out_grad(self);
    BasicTensor<T>& gx = gr.grad_accumulator(gr.input(self, 0));
    for (std::size_t n = 0; n < batch; ++n) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          gx[(n * plane + p) * channels + c] += go[(n * channels + c) * plane + p];
        }
      }
    }
  });
}

#define VQAD_INSTANTIATE_OPS(T)                                                                  \
  template BasicVar<T> add(BasicVar<T>, BasicVar<T>);                                            \
  template BasicVar<T> sub(BasicVar<T>, BasicVar<T>);                                            \
  template BasicVar<T> mul(BasicVar<T>, BasicVar<T>);                                            \
  template BasicVar<T> scale(BasicVar<T>, std::type_identity_t<T>);                              \
  template BasicVar<T> add_bias(BasicVar<T>, BasicVar<T>);                                       \
  template BasicVar<T> add_tiled(BasicVar<T>, BasicVar<T>);                                      \
  template BasicVar<T> matmul(BasicVar<T>, BasicVar<T>);                                         \
  template BasicVar<T> transpose(BasicVar<T>);                                                   \
  template BasicVar<T> reshape(BasicVar<T>, Shape);                                              \
  template BasicVar<T> relu(BasicVar<T>);                                                        \
  template BasicVar<T> gelu(BasicVar<T>);                                                        \
  template BasicVar<T> softmax(BasicVar<T>);                                                     \
  template BasicVar<T> layer_norm(BasicVar<T>, BasicVar<T>, BasicVar<T>, std::type_identity_t<T>); \
  template BasicVar<T> conv2d(BasicVar<T>, BasicVar<T>, BasicVar<T>, std::size_t, std::size_t);  \
  template BasicVar<T> conv_transpose2d(BasicVar<T>, BasicVar<T>, BasicVar<T>, std::size_t,      \
                                        std::size_t);                                            \
  template BasicVar<T> embedding(BasicVar<T>, std::span<const std::int32_t>);                    \
  template BasicVar<T> stop_gradient(BasicVar<T>);                                               \
  template BasicVar<T> straight_through(BasicVar<T>, BasicVar<T>);                               \
  template BasicVar<T> masked_cross_entropy(BasicVar<T>, std::span<const std::int32_t>,          \
                                            std::span<const float>);                             \
  template BasicTensor<T> attention_probabilities(const BasicTensor<T>&, const BasicTensor<T>&,  \
                                                  std::size_t, std::size_t, bool);               \
  template BasicVar<T> attention(BasicVar<T>, BasicVar<T>, BasicVar<T>, std::size_t, std::size_t, \
                                 bool);                                                          \
  template BasicVar<T> sum(BasicVar<T>);                                                         \
  template BasicVar<T> mean(BasicVar<T>);                                                        \
  template BasicVar<T> sum_squares(BasicVar<T>);                                                 \
  template BasicVar<T> mse(BasicVar<T>, BasicVar<T>);                                            \
  template BasicVar<T> nchw_to_rows(BasicVar<T>);                                                \
  template BasicVar<T> rows_to_nchw(BasicVar<T>, std::size_t, std::size_t, std::size_t);

VQAD_INSTANTIATE_OPS(float)
VQAD_INSTANTIATE_OPS(double)

}  // namespace vqad::ad
