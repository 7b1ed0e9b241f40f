#include "mf/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mf/error.hpp"
#include "mf/tensor/tape.hpp"

namespace mf {
namespace {

using std::int64_t;

void require_rank(const Tensor& t, int64_t rank, const char* op) {
  if (t.dim() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Adds g into t's gradient when t participates in differentiation.
void accumulate(Tensor t, std::span<const double> g) {
  if (!t.requires_grad()) return;
  auto dst = t.ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

Tensor finish(Tensor out, const char* op) {
  check_finite(out, op);
  return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in forward result");
  }
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x](std::span<const double> g) { accumulate(x, g); });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const auto rank = static_cast<std::size_t>(x.dim());
  if (axes.size() != rank) throw DimensionError("permute: axes rank mismatch");
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const int a = axes[i];
    if (a < 0 || static_cast<std::size_t>(a) >= rank || seen[a]) throw DimensionError("permute: bad axes");
    seen[a] = true;
    out_shape[i] = x.shape()[a];
  }
  std::vector<int64_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.shape()[i];

  // Source offset for every output element, shared by forward and backward.
  const int64_t n = x.numel();
  std::vector<int64_t> src(static_cast<std::size_t>(n));
  std::vector<int64_t> idx(rank, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += idx[i] * in_strides[axes[i]];
    src[o] = off;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor out(out_shape);
  auto od = out.mutable_data();
  auto xd = x.data();
  for (int64_t o = 0; o < n; ++o) od[o] = xd[src[o]];
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x = Tensor(x), src = std::move(src)](std::span<const double> g) mutable {
      if (!x.requires_grad()) return;
      auto gx = x.ensure_grad();
      for (std::size_t o = 0; o < src.size(); ++o) gx[src[o]] += g[o];
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] + b.data()[i];
  if (Tape::should_record({&a, &b})) {
    Tape::active()->record(out, [a, b](std::span<const double> g) {
      accumulate(a, g);
      accumulate(b, g);
    });
  }
  return finish(out, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] - b.data()[i];
  if (Tape::should_record({&a, &b})) {
    Tape::active()->record(out, [a, b](std::span<const double> g) {
      accumulate(a, g);
      if (!b.requires_grad()) return;
      Tensor bb = b;
      auto gb = bb.ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    });
  }
  return finish(out, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] * b.data()[i];
  if (Tape::should_record({&a, &b})) {
    Tape::active()->record(out, [a, b](std::span<const double> g) {
      if (a.requires_grad()) {
        Tensor aa = a;
        auto ga = aa.ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        Tensor bb = b;
        auto gb = bb.ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return finish(out, "mul");
}

Tensor scale(const Tensor& x, double s) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] * s;
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x, s](std::span<const double> g) {
      if (!x.requires_grad()) return;
      Tensor xx = x;
      auto gx = xx.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * s;
    });
  }
  return finish(out, "scale");
}

Tensor add_broadcast(const Tensor& x, const Tensor& y) {
  if (!is_suffix(y.shape(), x.shape())) {
    throw DimensionError("add_broadcast: " + shape_str(y.shape()) + " is not a suffix of " +
                         shape_str(x.shape()));
  }
  const auto inner = static_cast<std::size_t>(y.numel());
  Tensor out(x.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.data()[i] + y.data()[i % inner];
  if (Tape::should_record({&x, &y})) {
    Tape::active()->record(out, [x, y, inner](std::span<const double> g) {
      accumulate(x, g);
      if (!y.requires_grad()) return;
      Tensor yy = y;
      auto gy = yy.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gy[i % inner] += g[i];
    });
  }
  return finish(out, "add_broadcast");
}

Tensor mul_channels(const Tensor& x, const Tensor& s) {
  if (x.dim() < 2 || s.dim() != 1 || s.size(0) != x.size(1)) {
    throw DimensionError("mul_channels: " + shape_str(x.shape()) + " by " + shape_str(s.shape()));
  }
  const int64_t B = x.size(0), C = x.size(1);
  const int64_t inner = x.numel() / (B * C);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  auto sd = s.data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < inner; ++i) {
        const auto k = (b * C + c) * inner + i;
        o[k] = xd[k] * sd[c];
      }
  if (Tape::should_record({&x, &s})) {
    Tape::active()->record(out, [x, s, B, C, inner](std::span<const double> g) {
      if (x.requires_grad()) {
        Tensor xx = x;
        auto gx = xx.ensure_grad();
        for (int64_t b = 0; b < B; ++b)
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < inner; ++i) {
              const auto k = (b * C + c) * inner + i;
              gx[k] += g[k] * s.data()[c];
            }
      }
      if (s.requires_grad()) {
        Tensor ss = s;
        auto gs = ss.ensure_grad();
        for (int64_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < inner; ++i) {
              const auto k = (b * C + c) * inner + i;
              acc += g[k] * x.data()[k];
            }
          gs[c] += acc;
        }
      }
    });
  }
  return finish(out, "mul_channels");
}

Tensor mul_samples(const Tensor& x, const std::vector<double>& factors) {
  if (x.dim() < 1 || static_cast<int64_t>(factors.size()) != x.size(0)) {
    throw DimensionError("mul_samples: factor count does not match batch");
  }
  const int64_t B = x.size(0);
  const int64_t inner = B == 0 ? 0 : x.numel() / B;
  Tensor out(x.shape());
  auto o = out.mutable_data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < inner; ++i) o[b * inner + i] = x.data()[b * inner + i] * factors[b];
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x, factors, B, inner](std::span<const double> g) {
      if (!x.requires_grad()) return;
      Tensor xx = x;
      auto gx = xx.ensure_grad();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < inner; ++i) gx[b * inner + i] += g[b * inner + i] * factors[b];
    });
  }
  return finish(out, "mul_samples");
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x](std::span<const double> g) {
      if (!x.requires_grad()) return;
      Tensor xx = x;
      for (double& v : xx.ensure_grad()) v += g[0];
    });
  }
  return finish(out, "sum");
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias,
              const Conv2dOptions& opts) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const int64_t K = kernel.size(2);
  if (kernel.size(3) != K) throw DimensionError("conv2d: kernel must be square");
  if (K % 2 == 0 || K < 1) throw ConfigError("conv2d: kernel size must be odd");
  if (opts.stride < 1 || opts.padding < 0) throw ConfigError("conv2d: invalid stride or padding");
  if (opts.groups < 1) throw ConfigError("conv2d: groups must be positive");

  kernels::Conv2dGeometry g;
  g.batch = input.size(0);
  g.in_channels = input.size(1);
  g.height = input.size(2);
  g.width = input.size(3);
  g.out_channels = kernel.size(0);
  g.kernel = K;
  g.stride = opts.stride;
  g.padding = opts.padding;
  g.groups = opts.groups;
  g.mode = opts.padding_mode;

  if (g.in_channels % g.groups != 0 || g.out_channels % g.groups != 0) {
    throw ConfigError("conv2d: groups must divide input and output channels");
  }
  if (kernel.size(1) != g.in_per_group()) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kernel.size(1)) +
                         " channels per group, input provides " + std::to_string(g.in_per_group()));
  }
  if (bias && (bias->dim() != 1 || bias->size(0) != g.out_channels)) {
    throw DimensionError("conv2d: bias shape " + shape_str(bias->shape()));
  }
  if (g.mode == Padding::circular && (g.padding > g.height || g.padding > g.width)) {
    throw ConfigError("conv2d: circular padding larger than the input");
  }
  if (g.height + 2 * g.padding < K || g.width + 2 * g.padding < K) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }

  Tensor out({g.batch, g.out_channels, g.out_height(), g.out_width()});
  kernels::conv2d_forward(g, input.data(), kernel.data(),
                          bias ? bias->data() : std::span<const double>{}, out.mutable_data());

  if (Tape::should_record({&input, &kernel, bias ? &*bias : nullptr})) {
    Tensor b = bias ? *bias : Tensor();
    Tape::active()->record(out, [input, kernel, b, g](std::span<const double> go) {
      if (input.requires_grad()) {
        Tensor x = input;
        kernels::conv2d_backward_input(g, go, kernel.data(), x.ensure_grad());
      }
      if (kernel.requires_grad()) {
        Tensor w = kernel;
        kernels::conv2d_backward_weight(g, go, input.data(), w.ensure_grad());
      }
      if (b.defined() && b.requires_grad()) {
        Tensor bb = b;
        kernels::conv2d_backward_bias(g, go, bb.ensure_grad());
      }
    });
  }
  return finish(out, "conv2d");
}

Tensor avg_pool2d(const Tensor& input, int64_t kernel, int64_t stride, int64_t padding,
                  Padding padding_mode) {
  require_rank(input, 4, "avg_pool2d");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("avg_pool2d: kernel size must be odd");
  if (stride < 1 || padding < 0) throw ConfigError("avg_pool2d: invalid stride or padding");
  kernels::Pool2dGeometry g;
  g.batch = input.size(0);
  g.channels = input.size(1);
  g.height = input.size(2);
  g.width = input.size(3);
  g.kernel = kernel;
  g.stride = stride;
  g.padding = padding;
  g.mode = padding_mode;
  if (g.height + 2 * padding < kernel || g.width + 2 * padding < kernel) {
    throw DimensionError("avg_pool2d: kernel larger than padded input");
  }
  if (g.mode == Padding::circular && (padding > g.height || padding > g.width)) {
    throw ConfigError("avg_pool2d: circular padding larger than the input");
  }
  Tensor out({g.batch, g.channels, g.out_height(), g.out_width()});
  kernels::avg_pool2d_forward(g, input.data(), out.mutable_data());
  if (Tape::should_record({&input})) {
    Tape::active()->record(out, [input, g](std::span<const double> go) {
      if (!input.requires_grad()) return;
      Tensor x = input;
      kernels::avg_pool2d_backward(g, go, x.ensure_grad());
    });
  }
  return finish(out, "avg_pool2d");
}

Tensor linear(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias) {
  require_rank(weight, 2, "linear weight");
  if (input.dim() < 1) throw DimensionError("linear: scalar input");
  const int64_t cin = weight.size(1);
  const int64_t cout = weight.size(0);
  if (input.size(-1) != cin) {
    throw DimensionError("linear: input last axis " + std::to_string(input.size(-1)) +
                         " vs weight " + shape_str(weight.shape()));
  }
  if (bias && (bias->dim() != 1 || bias->size(0) != cout)) {
    throw DimensionError("linear: bias shape " + shape_str(bias->shape()));
  }
  const int64_t rows = input.numel() / cin;
  Shape out_shape = input.shape();
  out_shape.back() = cout;
  Tensor out(out_shape);
  kernels::linear_forward(rows, cin, cout, input.data(), weight.data(),
                          bias ? bias->data() : std::span<const double>{}, out.mutable_data());
  if (Tape::should_record({&input, &weight, bias ? &*bias : nullptr})) {
    Tensor b = bias ? *bias : Tensor();
    Tape::active()->record(out, [input, weight, b, rows, cin, cout](std::span<const double> g) {
      if (input.requires_grad()) {
        Tensor x = input;
        auto gx = x.ensure_grad();
        auto w = weight.data();
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t o = 0; o < cout; ++o) {
            const double gv = g[r * cout + o];
            for (int64_t i = 0; i < cin; ++i) gx[r * cin + i] += gv * w[o * cin + i];
          }
      }
      if (weight.requires_grad()) {
        Tensor w = weight;
        auto gw = w.ensure_grad();
        auto xd = input.data();
#pragma omp parallel for schedule(static)
        for (int64_t o = 0; o < cout; ++o)
          for (int64_t i = 0; i < cin; ++i) {
            double acc = 0.0;
            for (int64_t r = 0; r < rows; ++r) acc += g[r * cout + o] * xd[r * cin + i];
            gw[o * cin + i] += acc;
          }
      }
      if (b.defined() && b.requires_grad()) {
        Tensor bb = b;
        auto gb = bb.ensure_grad();
        for (int64_t o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (int64_t r = 0; r < rows; ++r) acc += g[r * cout + o];
          gb[o] += acc;
        }
      }
    });
  }
  return finish(out, "linear");
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.dim() < 2 || b.dim() != a.dim()) throw DimensionError("matmul: rank mismatch");
  for (int64_t i = 0; i + 2 < a.dim(); ++i) {
    if (a.shape()[i] != b.shape()[i]) throw DimensionError("matmul: batch axes differ");
  }
  const int64_t m = a.size(-2), k = a.size(-1);
  const int64_t bk = transpose_b ? b.size(-1) : b.size(-2);
  const int64_t n = transpose_b ? b.size(-2) : b.size(-1);
  if (bk != k) {
    throw DimensionError("matmul: inner extents " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int64_t batch = m * k == 0 ? 0 : a.numel() / (m * k);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  kernels::batched_matmul(batch, m, k, n, a.data(), b.data(), transpose_b, out.mutable_data());
  if (Tape::should_record({&a, &b})) {
    Tape::active()->record(out, [a, b, batch, m, k, n, transpose_b](std::span<const double> g) {
      if (a.requires_grad()) {
        // dA = G * B^T  (B stored k x n) or G * B (B stored n x k)
        Tensor aa = a;
        auto ga = aa.ensure_grad();
        auto bd = b.data();
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < batch * m; ++r) {
          const int64_t bi = r / m;
          for (int64_t t = 0; t < k; ++t) {
            double acc = 0.0;
            for (int64_t j = 0; j < n; ++j) {
              const double bv = transpose_b ? bd[(bi * n + j) * k + t] : bd[(bi * k + t) * n + j];
              acc += g[r * n + j] * bv;
            }
            ga[r * k + t] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        Tensor bb = b;
        auto gb = bb.ensure_grad();
        auto ad = a.data();
        // Each (bi, row-of-B) is owned by one iteration.
        const int64_t outer = transpose_b ? n : k;
        const int64_t inner = transpose_b ? k : n;
#pragma omp parallel for schedule(static)
        for (int64_t q = 0; q < batch * outer; ++q) {
          const int64_t bi = q / outer;
          const int64_t u = q % outer;
          for (int64_t v = 0; v < inner; ++v) {
            // transpose_b: gB[j, t] = sum_i G[i, j] A[i, t]  (u = j, v = t)
            // otherwise:   gB[t, j] = sum_i A[i, t] G[i, j]  (u = t, v = j)
            const int64_t j = transpose_b ? u : v;
            const int64_t t = transpose_b ? v : u;
            double acc = 0.0;
            for (int64_t i = 0; i < m; ++i) acc += g[(bi * m + i) * n + j] * ad[(bi * m + i) * k + t];
            gb[(bi * outer + u) * inner + v] += acc;
          }
        }
      }
    });
  }
  return finish(out, "matmul");
}

Tensor softmax(const Tensor& input, int64_t axis, const std::optional<Tensor>& additive_mask) {
  const int64_t rank = input.dim();
  if (rank < 1) throw DimensionError("softmax: scalar input");
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("softmax: axis out of range");
  if (additive_mask) {
    if (!is_suffix(additive_mask->shape(), input.shape())) {
      throw DimensionError("softmax: mask shape " + shape_str(additive_mask->shape()) +
                           " is not a suffix of " + shape_str(input.shape()));
    }
    for (double v : additive_mask->data()) {
      if (!(v == 0.0 || (std::isinf(v) && v < 0))) throw ConfigError("softmax: mask entries must be 0 or -inf");
    }
  }
  const int64_t len = input.size(axis);
  int64_t inner = 1;
  for (int64_t i = axis + 1; i < rank; ++i) inner *= input.shape()[i];
  const int64_t outer = len == 0 ? 0 : input.numel() / (len * inner);
  const int64_t mask_n = additive_mask ? additive_mask->numel() : 0;
  auto x = input.data();
  const double* mk = additive_mask ? additive_mask->data().data() : nullptr;

  Tensor out(input.shape());
  auto y = out.mutable_data();
  bool empty_slice = false;
#pragma omp parallel for schedule(static) reduction(|| : empty_slice)
  for (int64_t s = 0; s < outer * inner; ++s) {
    const int64_t o = s / inner, in = s % inner;
    const int64_t base = o * len * inner + in;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t t = 0; t < len; ++t) {
      const int64_t k = base + t * inner;
      if (mk != nullptr && std::isinf(mk[k % mask_n])) continue;
      mx = std::max(mx, x[k]);
    }
    if (std::isinf(mx)) {
      empty_slice = true;
      continue;
    }
    double z = 0.0;
    for (int64_t t = 0; t < len; ++t) {
      const int64_t k = base + t * inner;
      const double e = (mk != nullptr && std::isinf(mk[k % mask_n])) ? 0.0 : std::exp(x[k] - mx);
      y[k] = e;
      z += e;
    }
    for (int64_t t = 0; t < len; ++t) y[base + t * inner] /= z;
  }
  if (empty_slice) throw ConfigError("softmax: a slice has every entry masked (no valid key)");

  if (Tape::should_record({&input})) {
    Tape::active()->record(out, [input, out, outer, inner, len](std::span<const double> g) {
      if (!input.requires_grad()) return;
      Tensor xx = input;
      auto gx = xx.ensure_grad();
      auto yd = out.data();
#pragma omp parallel for schedule(static)
      for (int64_t s = 0; s < outer * inner; ++s) {
        const int64_t o = s / inner, in = s % inner;
        const int64_t base = o * len * inner + in;
        double dot = 0.0;
        for (int64_t t = 0; t < len; ++t) dot += g[base + t * inner] * yd[base + t * inner];
        for (int64_t t = 0; t < len; ++t) {
          const int64_t k = base + t * inner;
          gx[k] += yd[k] * (g[k] - dot);
        }
      }
    });
  }
  return finish(out, "softmax");
}

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(input, 4, "layer_norm");
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  const int64_t B = input.size(0), C = input.size(1), HW = input.size(2) * input.size(3);
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    throw DimensionError("layer_norm: affine parameters must be [" + std::to_string(C) + "]");
  }
  Tensor out(input.shape());
  // Normalized values and inverse std are kept for the backward pass.
  std::vector<double> xhat(static_cast<std::size_t>(input.numel()));
  std::vector<double> inv_std(static_cast<std::size_t>(B * HW));
  auto x = input.data();
  auto y = out.mutable_data();
  auto gm = gamma.data();
  auto bt = beta.data();
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < B * HW; ++s) {
    const int64_t b = s / HW, p = s % HW;
    double mu = 0.0;
    for (int64_t c = 0; c < C; ++c) mu += x[(b * C + c) * HW + p];
    mu /= static_cast<double>(C);
    double var = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      const double d = x[(b * C + c) * HW + p] - mu;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[s] = is;
    for (int64_t c = 0; c < C; ++c) {
      const int64_t k = (b * C + c) * HW + p;
      xhat[k] = (x[k] - mu) * is;
      y[k] = xhat[k] * gm[c] + bt[c];
    }
  }
  if (Tape::should_record({&input, &gamma, &beta})) {
    Tape::active()->record(out, [input, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), B,
                                 C, HW](std::span<const double> g) {
      auto gm = gamma.data();
      if (input.requires_grad()) {
        Tensor xx = input;
        auto gx = xx.ensure_grad();
#pragma omp parallel for schedule(static)
        for (int64_t s = 0; s < B * HW; ++s) {
          const int64_t b = s / HW, p = s % HW;
          double m1 = 0.0, m2 = 0.0;
          for (int64_t c = 0; c < C; ++c) {
            const int64_t k = (b * C + c) * HW + p;
            const double dxh = g[k] * gm[c];
            m1 += dxh;
            m2 += dxh * xhat[k];
          }
          m1 /= static_cast<double>(C);
          m2 /= static_cast<double>(C);
          for (int64_t c = 0; c < C; ++c) {
            const int64_t k = (b * C + c) * HW + p;
            gx[k] += inv_std[s] * (g[k] * gm[c] - m1 - xhat[k] * m2);
          }
        }
      }
      if (gamma.requires_grad() || beta.requires_grad()) {
        std::vector<double> dg(static_cast<std::size_t>(C), 0.0), db(static_cast<std::size_t>(C), 0.0);
        for (int64_t c = 0; c < C; ++c)
          for (int64_t b = 0; b < B; ++b)
            for (int64_t p = 0; p < HW; ++p) {
              const int64_t k = (b * C + c) * HW + p;
              dg[c] += g[k] * xhat[k];
              db[c] += g[k];
            }
        accumulate(gamma, dg);
        accumulate(beta, db);
      }
    });
  }
  return finish(out, "layer_norm");
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * kInvSqrt2));
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x, kInvSqrt2Pi](std::span<const double> g) {
      if (!x.requires_grad()) return;
      Tensor xx = x;
      auto gx = xx.ensure_grad();
      auto xd = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double v = xd[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return finish(out, "gelu");
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(0.0, x.data()[i]);
  if (Tape::should_record({&x})) {
    Tape::active()->record(out, [x](std::span<const double> g) {
      if (!x.requires_grad()) return;
      Tensor xx = x;
      auto gx = xx.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += x.data()[i] > 0 ? g[i] : 0.0;
    });
  }
  return finish(out, "relu");
}

namespace {

struct Interp {
  int64_t i0, i1;
  double w0, w1;
};

std::vector<Interp> interp_table(int64_t in, int64_t out) {
  std::vector<Interp> t(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int64_t i0 = static_cast<int64_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int64_t i1 = std::min(i0 + 1, in - 1);
    const double l = src - static_cast<double>(i0);
    t[o] = {i0, i1, 1.0 - l, l};
  }
  return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int64_t out_h, int64_t out_w) {
  require_rank(input, 4, "bilinear_resize");
  if (out_h < 1 || out_w < 1) throw ConfigError("bilinear_resize: output size must be positive");
  const int64_t B = input.size(0), C = input.size(1), H = input.size(2), W = input.size(3);
  if (H < 1 || W < 1) throw DimensionError("bilinear_resize: empty input");
  const auto th = interp_table(H, out_h);
  const auto tw = interp_table(W, out_w);
  Tensor out({B, C, out_h, out_w});
  auto x = input.data();
  auto y = out.mutable_data();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < B * C; ++p) {
    const double* ip = x.data() + p * H * W;
    double* op = y.data() + p * out_h * out_w;
    for (int64_t oh = 0; oh < out_h; ++oh) {
      const auto& a = th[oh];
      for (int64_t ow = 0; ow < out_w; ++ow) {
        const auto& c = tw[ow];
        op[oh * out_w + ow] = a.w0 * (c.w0 * ip[a.i0 * W + c.i0] + c.w1 * ip[a.i0 * W + c.i1]) +
                              a.w1 * (c.w0 * ip[a.i1 * W + c.i0] + c.w1 * ip[a.i1 * W + c.i1]);
      }
    }
  }
  if (Tape::should_record({&input})) {
    Tape::active()->record(out, [input, th, tw, B, C, H, W, out_h, out_w](std::span<const double> g) {
      if (!input.requires_grad()) return;
      Tensor xx = input;
      auto gx = xx.ensure_grad();
#pragma omp parallel for schedule(static)
      for (int64_t p = 0; p < B * C; ++p) {
        double* gp = gx.data() + p * H * W;
        const double* go = g.data() + p * out_h * out_w;
        for (int64_t oh = 0; oh < out_h; ++oh) {
          const auto& a = th[oh];
          for (int64_t ow = 0; ow < out_w; ++ow) {
            const auto& c = tw[ow];
            const double v = go[oh * out_w + ow];
            gp[a.i0 * W + c.i0] += v * a.w0 * c.w0;
            gp[a.i0 * W + c.i1] += v * a.w0 * c.w1;
            gp[a.i1 * W + c.i0] += v * a.w1 * c.w0;
            gp[a.i1 * W + c.i1] += v * a.w1 * c.w1;
          }
        }
      }
    });
  }
  return finish(out, "bilinear_resize");
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 4, "global_avg_pool");
  const int64_t B = input.size(0), C = input.size(1), HW = input.size(2) * input.size(3);
  if (HW == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  Tensor out({B, C});
  auto o = out.mutable_data();
  for (int64_t p = 0; p < B * C; ++p) {
    double acc = 0.0;
    for (int64_t i = 0; i < HW; ++i) acc += input.data()[p * HW + i];
    o[p] = acc / static_cast<double>(HW);
  }
  if (Tape::should_record({&input})) {
    Tape::active()->record(out, [input, B, C, HW](std::span<const double> g) {
      if (!input.requires_grad()) return;
      Tensor xx = input;
      auto gx = xx.ensure_grad();
      const double inv = 1.0 / static_cast<double>(HW);
      for (int64_t p = 0; p < B * C; ++p)
        for (int64_t i = 0; i < HW; ++i) gx[p * HW + i] += g[p] * inv;
    });
  }
  return finish(out, "global_avg_pool");
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Tensor& first = parts.front();
  require_rank(first, 4, "concat_channels");
  int64_t C = 0;
  for (const auto& p : parts) {
    require_rank(p, 4, "concat_channels");
    if (p.size(0) != first.size(0) || p.size(2) != first.size(2) || p.size(3) != first.size(3)) {
      throw DimensionError("concat_channels: batch/spatial mismatch");
    }
    C += p.size(1);
  }
  const int64_t B = first.size(0), HW = first.size(2) * first.size(3);
  Tensor out({B, C, first.size(2), first.size(3)});
  auto o = out.mutable_data();
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t ci = p.size(1);
    for (int64_t b = 0; b < B; ++b)
      std::copy_n(p.data().begin() + b * ci * HW, ci * HW, o.begin() + (b * C + offset) * HW);
    offset += ci;
  }
  bool any = false;
  for (const auto& p : parts) any = any || Tape::should_record({&p});
  if (any) {
    Tape::active()->record(out, [parts, B, C, HW](std::span<const double> g) {
      int64_t off = 0;
      for (const auto& p : parts) {
        const int64_t ci = p.size(1);
        if (p.requires_grad()) {
          Tensor pp = p;
          auto gp = pp.ensure_grad();
          for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < ci * HW; ++i) gp[b * ci * HW + i] += g[(b * C + off) * HW + i];
        }
        off += ci;
      }
    });
  }
  return out;
}

Tensor to_tokens(const Tensor& x) {
  require_rank(x, 4, "to_tokens");
  const int64_t B = x.size(0), C = x.size(1), N = x.size(2) * x.size(3);
  return reshape(permute(x, {0, 2, 3, 1}), {B, N, C});
}

Tensor from_tokens(const Tensor& tokens, int64_t height, int64_t width) {
  require_rank(tokens, 3, "from_tokens");
  if (tokens.size(1) != height * width) throw DimensionError("from_tokens: token count mismatch");
  const int64_t B = tokens.size(0), C = tokens.size(2);
  return permute(reshape(tokens, {B, height, width, C}), {0, 3, 1, 2});
}

}  // namespace mf
