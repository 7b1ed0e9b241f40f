#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mf/tensor/tensor.hpp"

namespace mf::trainer {

/// w_c = min(clamp, sqrt(max_count / count_c)), so the most frequent class
/// has weight 1. Classes with zero count get the clamp value.
std::vector<double> class_weights(const std::vector<std::int64_t>& counts, double clamp = 10.0);

struct CeOptions {
  /// Per-class weights; empty means uniform.
  std::vector<double> weights;
  double smoothing = 0.0;
  std::optional<std::int64_t> ignore_index;
};

/// Label-smoothed, class-weighted cross-entropy. logits are [B, K] or
/// [B, K, H, W]; targets hold one class id per sample or pixel in row-major
/// order. The mean is sum(w_y * l) / sum(w_y) over contributing elements.
Tensor ce_loss(const Tensor& logits, const std::vector<std::int64_t>& targets, const CeOptions& opts = {});

/// 1 - mean Dice over classes of softmax(logits) against one-hot targets,
/// with sums over batch and space and smoothing delta. A class is skipped
/// when its target is empty and its predicted mass is at most delta.
Tensor dice_loss(const Tensor& logits, const std::vector<std::int64_t>& targets, bool ignore_background,
                 double delta = 1e-5);

}  // namespace mf::trainer
