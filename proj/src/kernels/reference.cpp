// Serial reference kernels. Summation order matches the parallel kernels so
// the two agree bitwise; these exist for tests and the benchmark only.

#include "mf/kernels/kernels.hpp"

namespace mf::kernels::reference {
namespace {

std::int64_t resolve(std::int64_t i, std::int64_t n, Padding mode) {
  if (i >= 0 && i < n) return i;
  if (mode == Padding::zeros) return -1;
  return ((i % n) + n) % n;
}

}  // namespace

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const auto OH = g.out_height();
  const auto OW = g.out_width();
  const auto cin_g = g.in_per_group();
  const auto cout_g = g.out_per_group();
  const auto K = g.kernel;
  for (std::int64_t b = 0; b < g.batch; ++b)
    for (std::int64_t co = 0; co < g.out_channels; ++co)
      for (std::int64_t oh = 0; oh < OH; ++oh)
        for (std::int64_t ow = 0; ow < OW; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::int64_t cl = 0; cl < cin_g; ++cl) {
            const std::int64_t ci = (co / cout_g) * cin_g + cl;
            for (std::int64_t kh = 0; kh < K; ++kh) {
              const auto ih = resolve(oh * g.stride - g.padding + kh, g.height, g.mode);
              if (ih < 0) continue;
              for (std::int64_t kw = 0; kw < K; ++kw) {
                const auto iw = resolve(ow * g.stride - g.padding + kw, g.width, g.mode);
                if (iw < 0) continue;
                acc += in[((b * g.in_channels + ci) * g.height + ih) * g.width + iw] *
                       weight[((co * cin_g + cl) * K + kh) * K + kw];
              }
            }
          }
          out[((b * g.out_channels + co) * OH + oh) * OW + ow] = acc;
        }
}

void avg_pool2d_forward(const Pool2dGeometry& g, std::span<const double> in, std::span<double> out) {
  const auto OH = g.out_height();
  const auto OW = g.out_width();
  const auto K = g.kernel;
  const double inv = 1.0 / static_cast<double>(K * K);
  for (std::int64_t p = 0; p < g.batch * g.channels; ++p)
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        double acc = 0.0;
        for (std::int64_t kh = 0; kh < K; ++kh) {
          const auto ih = resolve(oh * g.stride - g.padding + kh, g.height, g.mode);
          if (ih < 0) continue;
          for (std::int64_t kw = 0; kw < K; ++kw) {
            const auto iw = resolve(ow * g.stride - g.padding + kw, g.width, g.mode);
            if (iw < 0) continue;
            acc += in[(p * g.height + ih) * g.width + iw];
          }
        }
        out[(p * OH + oh) * OW + ow] = acc * inv;
      }
}

void batched_matmul(std::int64_t batch, std::int64_t m, std::int64_t k, std::int64_t n,
                    std::span<const double> a, std::span<const double> b, bool transpose_b,
                    std::span<double> out) {
  for (std::int64_t bi = 0; bi < batch; ++bi)
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < k; ++t) {
          const double bv = transpose_b ? b[(bi * n + j) * k + t] : b[(bi * k + t) * n + j];
          acc += a[(bi * m + i) * k + t] * bv;
        }
        out[(bi * m + i) * n + j] = acc;
      }
}

void linear_forward(std::int64_t rows, std::int64_t in_features, std::int64_t out_features,
                    std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t o = 0; o < out_features; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::int64_t i = 0; i < in_features; ++i) acc += x[r * in_features + i] * w[o * in_features + i];
      y[r * out_features + o] = acc;
    }
}

}  // namespace mf::kernels::reference
