#pragma once

#include <optional>
#include <vector>

#include "mf/kernels/kernels.hpp"
#include "mf/tensor/tensor.hpp"

namespace mf {

using kernels::Padding;

// Differentiable primitives. Every op validates shapes (DimensionError),
// rejects invalid configuration (ConfigError), and raises NumericError if a
// forward result is not finite. When a Tape is active and an input requires
// a gradient, the op records its backward rule.

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
/// x + y where y's shape is a suffix of x's shape (broadcast over leading axes).
Tensor add_broadcast(const Tensor& x, const Tensor& y);
/// x[B, C, ...] * s[C]
Tensor mul_channels(const Tensor& x, const Tensor& s);
/// x[B, ...] * factors[b] with constant (non-trainable) per-sample factors.
Tensor mul_samples(const Tensor& x, const std::vector<double>& factors);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

struct Conv2dOptions {
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  std::int64_t groups = 1;
  Padding padding_mode = Padding::zeros;
};

/// Grouped 2-D cross-correlation. kernel is [Cout, Cin/groups, K, K], K odd.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias,
              const Conv2dOptions& opts = {});

/// Average pooling with a fixed kernel^2 divisor (padded cells count).
Tensor avg_pool2d(const Tensor& input, std::int64_t kernel, std::int64_t stride,
                  std::int64_t padding, Padding padding_mode = Padding::zeros);

/// Affine map over the last axis; weight is [Cout, Cin].
Tensor linear(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias);

/// Batched product over the last two axes: a[..., m, k] x b[..., k, n], or
/// b[..., n, k] when transpose_b. Leading axes must match.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// Max-stabilized softmax. The optional additive mask holds 0 or -inf, and
/// its shape must be a suffix of the input shape. A slice with every entry
/// masked is a ConfigError.
Tensor softmax(const Tensor& input, std::int64_t axis, const std::optional<Tensor>& additive_mask = {});

/// Normalizes over channels at each (b, h, w) of a [B, C, H, W] tensor, then
/// applies per-channel gamma and beta.
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

/// Half-pixel-center bilinear resampling (align_corners = false).
Tensor bilinear_resize(const Tensor& input, std::int64_t out_h, std::int64_t out_w);

/// [B, C, H, W] -> [B, C]
Tensor global_avg_pool(const Tensor& input);

/// Concatenation along axis 1 of [B, Ci, H, W] tensors.
Tensor concat_channels(const std::vector<Tensor>& parts);

/// [B, C, H, W] <-> [B, H*W, C]
Tensor to_tokens(const Tensor& x);
Tensor from_tokens(const Tensor& tokens, std::int64_t height, std::int64_t width);

/// Throws NumericError naming the op if any value is not finite.
void check_finite(const Tensor& t, const char* op);

}  // namespace mf
