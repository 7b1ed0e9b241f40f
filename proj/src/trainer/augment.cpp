#include "mf/trainer/augment.hpp"

#include <cmath>
#include <map>

#include "mf/error.hpp"

namespace mf::trainer {

namespace {

// Source position (in pixel units) sampled by output pixel (y, x).
std::pair<double, double> source_pixel(const Affine& a, std::int64_t y, std::int64_t x, std::int64_t H,
                                       std::int64_t W) {
  const double xn = (2.0 * static_cast<double>(x) + 1.0) / static_cast<double>(W) - 1.0;
  const double yn = (2.0 * static_cast<double>(y) + 1.0) / static_cast<double>(H) - 1.0;
  const double sx = a[0] * xn + a[1] * yn + a[2];
  const double sy = a[3] * xn + a[4] * yn + a[5];
  return {((sy + 1.0) * static_cast<double>(H) - 1.0) / 2.0, ((sx + 1.0) * static_cast<double>(W) - 1.0) / 2.0};
}

}  // namespace

Affine sample_affine(Rng& rng, double sigma) {
  Affine a = kIdentityAffine;
  if (sigma <= 0) return a;
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& v : a) v += n(rng);
  return a;
}

Tensor apply_affine(const Tensor& image, const Affine& a) {
  if (image.dim() != 3 && image.dim() != 4) {
    throw DimensionError("affine: expected [C, H, W] or [B, C, H, W], got " + shape_str(image.shape()));
  }
  const std::int64_t H = image.size(-2), W = image.size(-1);
  const std::int64_t planes = image.numel() / (H * W);
  Tensor out(image.shape());
  const auto in = image.data();
  auto od = out.mutable_data();
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const auto [sy, sx] = source_pixel(a, y, x, H, W);
      const auto y0 = static_cast<std::int64_t>(std::floor(sy));
      const auto x0 = static_cast<std::int64_t>(std::floor(sx));
      const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
      const std::int64_t ys[2] = {y0, y0 + 1};
      const std::int64_t xs[2] = {x0, x0 + 1};
      const double wy[2] = {1 - fy, fy};
      const double wx[2] = {1 - fx, fx};
      for (std::int64_t p = 0; p < planes; ++p) {
        double v = 0.0;
        for (int i = 0; i < 2; ++i) {
          if (ys[i] < 0 || ys[i] >= H || wy[i] == 0.0) continue;
          for (int j = 0; j < 2; ++j) {
            if (xs[j] < 0 || xs[j] >= W || wx[j] == 0.0) continue;
            v += wy[i] * wx[j] * in[(p * H + ys[i]) * W + xs[j]];
          }
        }
        od[(p * H + y) * W + x] = v;
      }
    }
  }
  return out;
}

std::vector<std::int64_t> apply_affine_mask(const std::vector<std::int64_t>& mask, std::int64_t H, std::int64_t W,
                                            const Affine& a, std::int64_t fill) {
  if (static_cast<std::int64_t>(mask.size()) != H * W) throw DimensionError("affine: mask size mismatch");
  std::vector<std::int64_t> out(mask.size(), fill);
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const auto [sy, sx] = source_pixel(a, y, x, H, W);
      const auto yi = static_cast<std::int64_t>(std::lround(sy));
      const auto xi = static_cast<std::int64_t>(std::lround(sx));
      if (yi >= 0 && yi < H && xi >= 0 && xi < W) out[y * W + x] = mask[yi * W + xi];
    }
  }
  return out;
}

Tensor affine_augment(const Tensor& image, Rng& rng, double sigma) {
  return apply_affine(image, sample_affine(rng, sigma));
}

PatchSampler::PatchSampler(const std::vector<std::vector<std::int64_t>>& masks,
                           const std::vector<std::int64_t>& heights, const std::vector<std::int64_t>& widths,
                           std::int64_t patch_h, std::int64_t patch_w)
    : masks_(masks), widths_(widths), ph_(patch_h), pw_(patch_w) {
  if (masks.empty() || heights.size() != masks.size() || widths.size() != masks.size()) {
    throw DimensionError("patch sampler: one height and width per mask required");
  }
  if (patch_h < 1 || patch_w < 1) throw ConfigError("patch sampler: patch must be positive");
  std::map<std::int64_t, std::int64_t> freq;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (static_cast<std::int64_t>(masks[i].size()) != heights[i] * widths[i]) {
      throw DimensionError("patch sampler: mask " + std::to_string(i) + " does not match its size");
    }
    if (patch_h > heights[i] || patch_w > widths[i]) {
      throw DimensionError("patch sampler: patch is larger than image " + std::to_string(i));
    }
    for (auto c : masks[i]) ++freq[c];
  }
  std::vector<double> weights;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::int64_t top = 0; top + patch_h <= heights[i]; ++top) {
      for (std::int64_t left = 0; left + patch_w <= widths[i]; ++left) {
        const PatchCoord pc{static_cast<std::int64_t>(i), top, left};
        coords_.push_back(pc);
        weights.push_back(1.0 / std::sqrt(static_cast<double>(freq[center_class(pc)])));
      }
    }
  }
  dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

std::int64_t PatchSampler::center_class(const PatchCoord& p) const {
  const auto& m = masks_[static_cast<std::size_t>(p.image)];
  return m[(p.top + ph_ / 2) * widths_[static_cast<std::size_t>(p.image)] + p.left + pw_ / 2];
}

PatchCoord PatchSampler::sample(Rng& rng) const { return coords_[dist_(rng)]; }

}  // namespace mf::trainer
