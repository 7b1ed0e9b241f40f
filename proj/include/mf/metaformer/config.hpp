#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mf/io/ini.hpp"
#include "mf/mixers/mixers.hpp"

namespace mf::metaformer {

enum class HeadKind { classify, segment };

/// Architecture of a four-stage MetaFormer. Defaults describe S12 with a
/// 10-class GAP head at 224x224.
struct ModelConfig {
  std::vector<std::int64_t> stage_channels{64, 128, 320, 512};
  std::vector<std::int64_t> stage_depths{2, 2, 6, 2};
  std::vector<mixers::MixerSpec> signature =
      std::vector<mixers::MixerSpec>(4, mixers::MixerSpec{mixers::MixerKind::pooling, 3, 16});
  std::int64_t mlp_ratio = 4;
  HeadKind head = HeadKind::classify;
  std::int64_t num_classes = 10;
  std::int64_t decoder_dim = 256;
  std::int64_t in_channels = 3;
  std::int64_t input_h = 224;
  std::int64_t input_w = 224;
  double layerscale_init = 1e-5;
  double stochastic_depth_max = 0.1;
  std::int64_t heads_divisor = 16;
  Padding padding = Padding::zeros;

  static constexpr std::int64_t kStages = 4;
  static constexpr std::int64_t kTotalStride = 32;

  void validate() const;

  /// Spatial extent of stage i for the configured input.
  std::int64_t stage_height(std::int64_t stage) const;
  std::int64_t stage_width(std::int64_t stage) const;

  /// Section "[model]" text; parse(to_text()) reproduces the config.
  std::string to_text() const;
  void write(io::IniDocument& doc) const;
  static ModelConfig parse(const std::string& text);
  /// Reads "[model]"; absent keys keep their defaults, unknown keys throw.
  static ModelConfig read(const io::IniDocument& doc);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// "pool3" (all stages) or four comma-separated mixer tokens.
std::vector<mixers::MixerSpec> parse_signature(const std::string& text, std::int64_t heads_divisor = 16);
std::string signature_string(const std::vector<mixers::MixerSpec>& signature);

/// Stage resolution after the stride-4 stem and stride-2 downsamplings.
std::int64_t stage_extent(std::int64_t input, std::int64_t stage);

}  // namespace mf::metaformer
