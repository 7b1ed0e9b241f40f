#pragma once

#include <cstdint>
#include <string>

#include "mf/io/ini.hpp"

namespace mf::trainer {

enum class LossKind { ce, ce_plus_dice };

struct TrainConfig {
  double lr = 1e-3;
  double min_lr = 1e-5;
  double weight_decay = 0.1;
  std::int64_t warmup_epochs = 5;
  std::int64_t epochs = 30;
  std::int64_t batch_size = 16;
  /// When positive, overrides epochs * steps_per_epoch.
  std::int64_t max_steps = 0;
  double label_smoothing = 0.1;
  double class_weight_clamp = 10.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::ce;
  bool ignore_background = false;
  bool augment = true;
  double affine_sigma = 0.1;
  /// Square training patch for segmentation; 0 trains on whole images.
  std::int64_t patch = 0;
  double grad_alarm = 1e3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  void write(io::IniDocument& doc) const;
  /// Reads "[train]"; absent keys keep their defaults, unknown keys throw.
  static TrainConfig read(const io::IniDocument& doc);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace mf::trainer
