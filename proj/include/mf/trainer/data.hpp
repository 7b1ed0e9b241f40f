#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/tensor/init.hpp"

namespace mf::trainer {

/// In-memory image set. images is [N, C, H, W]; classification sets carry
/// labels, segmentation sets carry row-major masks of N * H * W class ids.
struct Dataset {
  Tensor images;
  std::vector<std::int64_t> labels;
  std::vector<std::int64_t> masks;
  std::vector<std::string> ids;
  std::int64_t num_classes = 2;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  bool segmentation() const { return !masks.empty(); }
  std::int64_t height() const { return images.size(2); }
  std::int64_t width() const { return images.size(3); }

  /// Copies the given samples into a new batch.
  Dataset subset(const std::vector<std::int64_t>& indices) const;
  /// Label counts per class (pixels for segmentation).
  std::vector<std::int64_t> class_counts() const;
};

/// Two-class set that is linearly separable on per-channel means: class 1
/// shifts channel 0 up and channel 1 down by `shift`, class 0 the reverse,
/// on top of N(0, noise^2) pixels. Classes alternate.
Dataset synthetic_separable(std::int64_t n, std::int64_t size, std::int64_t channels, std::uint64_t seed,
                            double shift = 0.5, double noise = 0.5);

/// Segmentation toy set: a bright square of class 1 on noisy background.
Dataset synthetic_squares(std::int64_t n, std::int64_t size, std::int64_t channels, std::uint64_t seed);

/// Folder with labels.csv (file,label) pointing at 8-bit PGM/PPM images of
/// equal size. Pixels are scaled to [0, 1].
Dataset load_classification_folder(const std::string& dir, std::int64_t num_classes);

/// Folder with pairs.csv (image,mask); masks are PGM files whose gray values
/// are class ids.
Dataset load_segmentation_folder(const std::string& dir, std::int64_t num_classes);

}  // namespace mf::trainer
