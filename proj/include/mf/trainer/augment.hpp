#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mf/tensor/init.hpp"

namespace mf::trainer {

/// Row-major 2x3 matrix acting on normalized coordinates in [-1, 1]
/// (pixel centres at (2i + 1) / n - 1). Output pixel p samples the input at
/// A * [p, 1].
using Affine = std::array<double, 6>;

constexpr Affine kIdentityAffine{1, 0, 0, 0, 1, 0};

/// Identity plus independent N(0, sigma^2) noise on every entry.
Affine sample_affine(Rng& rng, double sigma);

/// Bilinear resampling of [C, H, W] or [B, C, H, W]; samples outside the
/// image read as zero.
Tensor apply_affine(const Tensor& image, const Affine& a);

/// Nearest-neighbour resampling of an integer mask [H, W] with the same
/// transform; outside pixels get fill.
std::vector<std::int64_t> apply_affine_mask(const std::vector<std::int64_t>& mask, std::int64_t H, std::int64_t W,
                                            const Affine& a, std::int64_t fill = 0);

Tensor affine_augment(const Tensor& image, Rng& rng, double sigma = 0.1);

struct PatchCoord {
  std::int64_t image = 0;
  std::int64_t top = 0;
  std::int64_t left = 0;
};

/// Draws patch positions whose centre pixel class c is chosen with
/// probability proportional to 1 / sqrt(freq(c)), frequencies taken over all
/// masks. Patch centre is (top + ph / 2, left + pw / 2).
class PatchSampler {
 public:
  /// masks[i] is a row-major [heights[i], widths[i]] class map.
  PatchSampler(const std::vector<std::vector<std::int64_t>>& masks, const std::vector<std::int64_t>& heights,
               const std::vector<std::int64_t>& widths, std::int64_t patch_h, std::int64_t patch_w);

  PatchCoord sample(Rng& rng) const;
  /// Class of the centre pixel of a patch.
  std::int64_t center_class(const PatchCoord& p) const;
  std::size_t candidates() const { return coords_.size(); }

 private:
  std::vector<std::vector<std::int64_t>> masks_;
  std::vector<std::int64_t> widths_;
  std::int64_t ph_, pw_;
  std::vector<PatchCoord> coords_;
  mutable std::discrete_distribution<std::size_t> dist_;
};

}  // namespace mf::trainer
