#pragma once

// Raw numeric kernels over contiguous float64 buffers.
//
// Functions in mf::kernels are the OpenMP-parallel production kernels.
// Parallelism is always over independent output elements (or independent
// gradient planes) and every reduction runs serially in a fixed order, so
// results are bit-identical for any thread count. mf::kernels::reference
// holds serial versions with the same loop order; tests compare the two
// bitwise and the benchmark target times them against each other.

#include <atomic>
#include <cstdint>
#include <span>

namespace mf::kernels {

enum class Padding { zeros, circular };

struct Conv2dGeometry {
  std::int64_t batch = 1;
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  std::int64_t groups = 1;
  Padding mode = Padding::zeros;

  std::int64_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::int64_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
  std::int64_t in_per_group() const { return in_channels / groups; }
  std::int64_t out_per_group() const { return out_channels / groups; }
};

struct Pool2dGeometry {
  std::int64_t batch = 1;
  std::int64_t channels = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;
  std::int64_t kernel = 1;
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  Padding mode = Padding::zeros;

  std::int64_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::int64_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

/// Counts multiply-accumulates executed by conv and pool kernels while in
/// scope. Only taps that touch real (or wrapped) input are counted; taps
/// landing on zero padding are skipped by the kernels and not counted.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  std::int64_t count() const { return count_.load(); }
  static void add(std::int64_t n);

 private:
  std::atomic<std::int64_t> count_{0};
  MacCounter* previous_;
};

// out[b, co, oh, ow] = bias[co] + sum_{ci in group, kh, kw} in * w
void conv2d_forward(const Conv2dGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out);
// Accumulating backward passes.
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> grad_out,
                           std::span<const double> weight, std::span<double> grad_in);
void conv2d_backward_weight(const Conv2dGeometry& g, std::span<const double> grad_out,
                            std::span<const double> in, std::span<double> grad_weight);
void conv2d_backward_bias(const Conv2dGeometry& g, std::span<const double> grad_out,
                          std::span<double> grad_bias);

// Divisor is always kernel^2, padded cells included.
void avg_pool2d_forward(const Pool2dGeometry& g, std::span<const double> in, std::span<double> out);
void avg_pool2d_backward(const Pool2dGeometry& g, std::span<const double> grad_out,
                         std::span<double> grad_in);

// out[b] = a[b] (m x k) * b[b] (k x n), or b[b]^T when b is stored (n x k).
void batched_matmul(std::int64_t batch, std::int64_t m, std::int64_t k, std::int64_t n,
                    std::span<const double> a, std::span<const double> b, bool transpose_b,
                    std::span<double> out);

// y[r, o] = bias[o] + sum_i x[r, i] * w[o, i]
void linear_forward(std::int64_t rows, std::int64_t in_features, std::int64_t out_features,
                    std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);

namespace reference {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out);
void avg_pool2d_forward(const Pool2dGeometry& g, std::span<const double> in, std::span<double> out);
void batched_matmul(std::int64_t batch, std::int64_t m, std::int64_t k, std::int64_t n,
                    std::span<const double> a, std::span<const double> b, bool transpose_b,
                    std::span<double> out);
void linear_forward(std::int64_t rows, std::int64_t in_features, std::int64_t out_features,
                    std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);

}  // namespace reference

int max_threads();
void set_threads(int n);

}  // namespace mf::kernels
