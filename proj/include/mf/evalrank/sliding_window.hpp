#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mf/tensor/tensor.hpp"

namespace mf::evalrank {

/// Maps a [1, C, ph, pw] patch to [1, K, ph, pw] logits.
using PatchModel = std::function<Tensor(const Tensor&)>;

enum class WindowWeighting { gaussian, uniform };

struct SlidingWindowOptions {
  std::int64_t patch_h = 768;
  std::int64_t patch_w = 768;
  double overlap = 0.25;
  WindowWeighting weighting = WindowWeighting::gaussian;
  /// Gaussian sigma as a fraction of the patch extent.
  double sigma_fraction = 1.0 / 8.0;
};

/// Window origins along one axis: stride max(1, floor(patch * (1 - overlap)))
/// from 0, with the last window clamped to end at the image edge.
std::vector<std::int64_t> window_starts(std::int64_t size, std::int64_t patch, double overlap);

/// 1-D importance profile of a window: exp(-(i - (p-1)/2)^2 / (2 sigma^2)),
/// or all ones for uniform weighting.
std::vector<double> window_profile(std::int64_t patch, const SlidingWindowOptions& opts);

/// Tiles image [1, C, H, W] with overlapping windows, runs the model on each
/// and blends the logits with per-pixel normalized separable weights.
Tensor sliding_window_infer(const PatchModel& model, const Tensor& image, const SlidingWindowOptions& opts = {});

}  // namespace mf::evalrank
