#include "mf/evalrank/sliding_window.hpp"

#include <cmath>

#include "mf/error.hpp"
#include "mf/tensor/tape.hpp"

namespace mf::evalrank {

std::vector<std::int64_t> window_starts(std::int64_t size, std::int64_t patch, double overlap) {
  if (patch < 1) throw ConfigError("sliding window: patch must be positive");
  if (patch > size) throw DimensionError("sliding window: patch " + std::to_string(patch) +
                                         " is larger than the image extent " + std::to_string(size));
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("sliding window: overlap must lie in [0, 1)");
  const auto stride = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(patch * (1.0 - overlap))));
  std::vector<std::int64_t> starts;
  for (std::int64_t s = 0; s + patch < size; s += stride) starts.push_back(s);
  if (starts.empty() || starts.back() != size - patch) starts.push_back(size - patch);
  return starts;
}

std::vector<double> window_profile(std::int64_t patch, const SlidingWindowOptions& opts) {
  std::vector<double> w(static_cast<std::size_t>(patch), 1.0);
  if (opts.weighting == WindowWeighting::uniform) return w;
  const double sigma = opts.sigma_fraction * static_cast<double>(patch);
  if (!(sigma > 0)) throw ConfigError("sliding window: sigma must be positive");
  const double center = (static_cast<double>(patch) - 1.0) / 2.0;
  for (std::int64_t i = 0; i < patch; ++i) {
    const double d = static_cast<double>(i) - center;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
  }
  return w;
}

Tensor sliding_window_infer(const PatchModel& model, const Tensor& image, const SlidingWindowOptions& opts) {
  if (image.dim() != 4 || image.size(0) != 1) {
    throw DimensionError("sliding window: expected a [1, C, H, W] image, got " + shape_str(image.shape()));
  }
  const std::int64_t C = image.size(1), H = image.size(2), W = image.size(3);
  const std::int64_t ph = opts.patch_h, pw = opts.patch_w;
  const auto rows = window_starts(H, ph, opts.overlap);
  const auto cols = window_starts(W, pw, opts.overlap);
  const auto wy = window_profile(ph, opts);
  const auto wx = window_profile(pw, opts);

  // Total weight per pixel first, so a pixel covered by one window gets
  // weight exactly 1 and reproduces the model output bit for bit.
  std::vector<double> total(static_cast<std::size_t>(H * W), 0.0);
  for (auto r : rows) {
    for (auto c : cols) {
      for (std::int64_t y = 0; y < ph; ++y) {
        for (std::int64_t x = 0; x < pw; ++x) total[(r + y) * W + c + x] += wy[y] * wx[x];
      }
    }
  }

  NoGradGuard no_grad;
  const auto src = image.data();
  Tensor out;
  std::int64_t K = 0;
  for (auto r : rows) {
    for (auto c : cols) {
      Tensor patch({1, C, ph, pw});
      auto pd = patch.mutable_data();
      for (std::int64_t ch = 0; ch < C; ++ch) {
        for (std::int64_t y = 0; y < ph; ++y) {
          for (std::int64_t x = 0; x < pw; ++x) {
            pd[(ch * ph + y) * pw + x] = src[(ch * H + r + y) * W + c + x];
          }
        }
      }
      const Tensor logits = model(patch);
      if (logits.dim() != 4 || logits.size(0) != 1 || logits.size(2) != ph || logits.size(3) != pw) {
        throw DimensionError("sliding window: model returned " + shape_str(logits.shape()) + " for a " +
                             std::to_string(ph) + "x" + std::to_string(pw) + " patch");
      }
      if (!out.defined()) {
        K = logits.size(1);
        out = Tensor::zeros({1, K, H, W});
      } else if (logits.size(1) != K) {
        throw DimensionError("sliding window: model changed its class count between patches");
      }
      auto od = out.mutable_data();
      const auto ld = logits.data();
      for (std::int64_t k = 0; k < K; ++k) {
        for (std::int64_t y = 0; y < ph; ++y) {
          for (std::int64_t x = 0; x < pw; ++x) {
            const std::int64_t pix = (r + y) * W + c + x;
            od[k * H * W + pix] += (wy[y] * wx[x] / total[pix]) * ld[(k * ph + y) * pw + x];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace mf::evalrank
