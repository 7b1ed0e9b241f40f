#include "mf/kernels/kernels.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mf::kernels {
namespace {

std::atomic<MacCounter*> g_counter{nullptr};

inline std::int64_t wrap(std::int64_t i, std::int64_t n) {
  const std::int64_t r = i % n;
  return r < 0 ? r + n : r;
}

// Maps a padded coordinate to a source index, or -1 when it lands on zero
// padding.
inline std::int64_t source_index(std::int64_t i, std::int64_t n, Padding mode) {
  if (i >= 0 && i < n) return i;
  return mode == Padding::circular ? wrap(i, n) : -1;
}

}  // namespace

MacCounter::MacCounter() : previous_(g_counter.exchange(this)) {}
MacCounter::~MacCounter() { g_counter.store(previous_); }

void MacCounter::add(std::int64_t n) {
  if (MacCounter* c = g_counter.load(); c != nullptr) c->count_.fetch_add(n);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const std::int64_t oh_n = g.out_height();
  const std::int64_t ow_n = g.out_width();
  const std::int64_t cin_g = g.in_per_group();
  const std::int64_t cout_g = g.out_per_group();
  const std::int64_t K = g.kernel;
  const std::int64_t planes = g.batch * g.out_channels;
  std::int64_t total_macs = 0;

#pragma omp parallel for schedule(static) reduction(+ : total_macs)
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::int64_t b = p / g.out_channels;
    const std::int64_t co = p % g.out_channels;
    const std::int64_t group = co / cout_g;
    const double* wbase = weight.data() + co * cin_g * K * K;
    double* oplane = out.data() + p * oh_n * ow_n;
    std::int64_t macs = 0;
    for (std::int64_t oh = 0; oh < oh_n; ++oh) {
      for (std::int64_t ow = 0; ow < ow_n; ++ow) {
        double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
        for (std::int64_t cl = 0; cl < cin_g; ++cl) {
          const std::int64_t ci = group * cin_g + cl;
          const double* iplane = in.data() + (b * g.in_channels + ci) * g.height * g.width;
          const double* wk = wbase + cl * K * K;
          for (std::int64_t kh = 0; kh < K; ++kh) {
            const std::int64_t ih = source_index(oh * g.stride - g.padding + kh, g.height, g.mode);
            if (ih < 0) continue;
            for (std::int64_t kw = 0; kw < K; ++kw) {
              const std::int64_t iw = source_index(ow * g.stride - g.padding + kw, g.width, g.mode);
              if (iw < 0) continue;
              acc += iplane[ih * g.width + iw] * wk[kh * K + kw];
              ++macs;
            }
          }
        }
        oplane[oh * ow_n + ow] = acc;
      }
    }
    total_macs += macs;
  }
  MacCounter::add(total_macs);
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in) {
  const std::int64_t oh_n = g.out_height();
  const std::int64_t ow_n = g.out_width();
  const std::int64_t cin_g = g.in_per_group();
  const std::int64_t cout_g = g.out_per_group();
  const std::int64_t K = g.kernel;
  const std::int64_t planes = g.batch * g.in_channels;

  // One thread owns each input-gradient plane, so the scatter order inside a
  // plane is fixed.
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::int64_t b = p / g.in_channels;
    const std::int64_t ci = p % g.in_channels;
    const std::int64_t group = ci / cin_g;
    const std::int64_t cl = ci % cin_g;
    double* gplane = grad_in.data() + p * g.height * g.width;
    for (std::int64_t j = 0; j < cout_g; ++j) {
      const std::int64_t co = group * cout_g + j;
      const double* go = grad_out.data() + (b * g.out_channels + co) * oh_n * ow_n;
      const double* wk = weight.data() + (co * cin_g + cl) * K * K;
      for (std::int64_t oh = 0; oh < oh_n; ++oh) {
        for (std::int64_t ow = 0; ow < ow_n; ++ow) {
          const double gv = go[oh * ow_n + ow];
          for (std::int64_t kh = 0; kh < K; ++kh) {
            const std::int64_t ih = source_index(oh * g.stride - g.padding + kh, g.height, g.mode);
            if (ih < 0) continue;
            for (std::int64_t kw = 0; kw < K; ++kw) {
              const std::int64_t iw = source_index(ow * g.stride - g.padding + kw, g.width, g.mode);
              if (iw < 0) continue;
              gplane[ih * g.width + iw] += gv * wk[kh * K + kw];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const Conv2dGeometry& g, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_weight) {
  const std::int64_t oh_n = g.out_height();
  const std::int64_t ow_n = g.out_width();
  const std::int64_t cin_g = g.in_per_group();
  const std::int64_t cout_g = g.out_per_group();
  const std::int64_t K = g.kernel;
  const std::int64_t filters = g.out_channels * cin_g;

#pragma omp parallel for schedule(static)
  for (std::int64_t f = 0; f < filters; ++f) {
    const std::int64_t co = f / cin_g;
    const std::int64_t cl = f % cin_g;
    const std::int64_t ci = (co / cout_g) * cin_g + cl;
    std::vector<double> acc(static_cast<std::size_t>(K * K), 0.0);
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const double* go = grad_out.data() + (b * g.out_channels + co) * oh_n * ow_n;
      const double* iplane = in.data() + (b * g.in_channels + ci) * g.height * g.width;
      for (std::int64_t oh = 0; oh < oh_n; ++oh) {
        for (std::int64_t ow = 0; ow < ow_n; ++ow) {
          const double gv = go[oh * ow_n + ow];
          for (std::int64_t kh = 0; kh < K; ++kh) {
            const std::int64_t ih = source_index(oh * g.stride - g.padding + kh, g.height, g.mode);
            if (ih < 0) continue;
            for (std::int64_t kw = 0; kw < K; ++kw) {
              const std::int64_t iw = source_index(ow * g.stride - g.padding + kw, g.width, g.mode);
              if (iw < 0) continue;
              acc[static_cast<std::size_t>(kh * K + kw)] += gv * iplane[ih * g.width + iw];
            }
          }
        }
      }
    }
    double* gw = grad_weight.data() + f * K * K;
    for (std::int64_t t = 0; t < K * K; ++t) gw[t] += acc[static_cast<std::size_t>(t)];
  }
}

void conv2d_backward_bias(const Conv2dGeometry& g, std::span<const double> grad_out,
                          std::span<double> grad_bias) {
  const std::int64_t plane = g.out_height() * g.out_width();
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < g.out_channels; ++co) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const double* go = grad_out.data() + (b * g.out_channels + co) * plane;
      for (std::int64_t i = 0; i < plane; ++i) acc += go[i];
    }
    grad_bias[static_cast<std::size_t>(co)] += acc;
  }
}

void avg_pool2d_forward(const Pool2dGeometry& g, std::span<const double> in, std::span<double> out) {
  const std::int64_t oh_n = g.out_height();
  const std::int64_t ow_n = g.out_width();
  const std::int64_t K = g.kernel;
  const double inv = 1.0 / static_cast<double>(K * K);
  const std::int64_t planes = g.batch * g.channels;
  std::int64_t total_macs = 0;

#pragma omp parallel for schedule(static) reduction(+ : total_macs)
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* iplane = in.data() + p * g.height * g.width;
    double* oplane = out.data() + p * oh_n * ow_n;
    std::int64_t macs = 0;
    for (std::int64_t oh = 0; oh < oh_n; ++oh) {
      for (std::int64_t ow = 0; ow < ow_n; ++ow) {
        double acc = 0.0;
        for (std::int64_t kh = 0; kh < K; ++kh) {
          const std::int64_t ih = source_index(oh * g.stride - g.padding + kh, g.height, g.mode);
          if (ih < 0) continue;
          for (std::int64_t kw = 0; kw < K; ++kw) {
            const std::int64_t iw = source_index(ow * g.stride - g.padding + kw, g.width, g.mode);
            if (iw < 0) continue;
            acc += iplane[ih * g.width + iw];
            ++macs;
          }
        }
        oplane[oh * ow_n + ow] = acc * inv;
      }
    }
    total_macs += macs;
  }
  MacCounter::add(total_macs);
}

void avg_pool2d_backward(const Pool2dGeometry& g, std::span<const double> grad_out,
                         std::span<double> grad_in) {
  const std::int64_t oh_n = g.out_height();
  const std::int64_t ow_n = g.out_width();
  const std::int64_t K = g.kernel;
  const double inv = 1.0 / static_cast<double>(K * K);
  const std::int64_t planes = g.batch * g.channels;

#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* go = grad_out.data() + p * oh_n * ow_n;
    double* gplane = grad_in.data() + p * g.height * g.width;
    for (std::int64_t oh = 0; oh < oh_n; ++oh) {
      for (std::int64_t ow = 0; ow < ow_n; ++ow) {
        const double gv = go[oh * ow_n + ow] * inv;
        for (std::int64_t kh = 0; kh < K; ++kh) {
          const std::int64_t ih = source_index(oh * g.stride - g.padding + kh, g.height, g.mode);
          if (ih < 0) continue;
          for (std::int64_t kw = 0; kw < K; ++kw) {
            const std::int64_t iw = source_index(ow * g.stride - g.padding + kw, g.width, g.mode);
            if (iw < 0) continue;
            gplane[ih * g.width + iw] += gv;
          }
        }
      }
    }
  }
}

void batched_matmul(std::int64_t batch, std::int64_t m, std::int64_t k, std::int64_t n,
                    std::span<const double> a, std::span<const double> b, bool transpose_b,
                    std::span<double> out) {
  const std::int64_t rows = batch * m;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t bi = r / m;
    const double* arow = a.data() + r * k;
    const double* bmat = b.data() + bi * k * n;
    double* orow = out.data() + r * n;
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      if (transpose_b) {
        const double* brow = bmat + j * k;
        for (std::int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      } else {
        for (std::int64_t t = 0; t < k; ++t) acc += arow[t] * bmat[t * n + j];
      }
      orow[j] = acc;
    }
  }
}

void linear_forward(std::int64_t rows, std::int64_t in_features, std::int64_t out_features,
                    std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in_features;
    double* yr = y.data() + r * out_features;
    for (std::int64_t o = 0; o < out_features; ++o) {
      const double* wr = w.data() + o * in_features;
      double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
      for (std::int64_t i = 0; i < in_features; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }
}

}  // namespace mf::kernels
