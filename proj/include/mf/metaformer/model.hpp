#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mf/metaformer/config.hpp"
#include "mf/mixers/mixers.hpp"
#include "mf/tensor/init.hpp"

namespace mf::metaformer {

using mixers::ParameterVisitor;

/// One MetaFormer block:
///   y = x + DropPath(ls1 * Mixer(Norm1(x)))
///   out = y + DropPath(ls2 * MLP(Norm2(y)))
struct Block {
  Tensor norm1_weight, norm1_bias;
  mixers::TokenMixer mixer;
  Tensor ls1;
  Tensor norm2_weight, norm2_bias;
  Tensor fc1_weight, fc1_bias;  // [hidden, C], [hidden]
  Tensor fc2_weight, fc2_bias;  // [C, hidden], [C]
  Tensor ls2;
  double drop_prob = 0.0;

  static Block init(const mixers::MixerSpec& spec, std::int64_t channels, std::int64_t mlp_ratio,
                    double layerscale_init, double drop_prob, Padding padding, Rng& rng);
  std::int64_t channels() const { return ls1.size(0); }
  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);
};

/// Applies a block. Drop-path is active only when training and rng is given.
Tensor block_forward(const Tensor& x, const Block& block, bool training, Rng* rng,
                     const std::optional<Tensor>& pos_emb = {});

/// Pointwise MLP over channels: fc2(GELU(fc1(x))) on [B, C, H, W].
Tensor channel_mlp(const Tensor& x, const Block& block);

struct Stage {
  Tensor embed_weight, embed_bias;
  std::int64_t embed_stride = 1;
  std::int64_t embed_padding = 0;
  /// Learned absolute embedding [C, H, W]; present when the stage's mixer is
  /// global attention.
  std::optional<Tensor> pos_emb;
  std::vector<Block> blocks;
};

/// All-MLP dense-prediction head fed by the four stage outputs.
struct SegDecoder {
  std::vector<Tensor> proj_weight, proj_bias;  // per stage: [D, C_i], [D]
  Tensor fuse_weight, fuse_bias;               // [D, 4D], [D]
  Tensor cls_weight, cls_bias;                 // [classes, D], [classes]
};

struct ParamBreakdown {
  std::int64_t backbone_ex_mixers = 0;
  std::int64_t mixers = 0;
  std::int64_t pos_emb = 0;
  std::int64_t head = 0;
  std::int64_t total() const { return backbone_ex_mixers + mixers + pos_emb + head; }
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class MetaFormer {
 public:
  MetaFormer(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Stage>& stages() { return stages_; }
  const std::vector<Stage>& stages() const { return stages_; }

  /// Strided convolution entering stage i (stride 4 for stage 0, else 2).
  Tensor patch_embed(const Tensor& x, std::int64_t stage_index) const;
  /// Output of each stage's last block.
  std::vector<Tensor> forward_features(const Tensor& images, bool training = false, Rng* rng = nullptr) const;
  /// [B, num_classes]
  Tensor forward_classify(const Tensor& images, bool training = false, Rng* rng = nullptr) const;
  /// [B, num_classes, H, W]
  Tensor forward_segment(const Tensor& images, bool training = false, Rng* rng = nullptr) const;
  /// Dispatches on the configured head.
  Tensor forward(const Tensor& images, bool training = false, Rng* rng = nullptr) const;

  ParamBreakdown count_params() const;
  void visit_parameters(const ParameterVisitor& visit);
  std::vector<NamedTensor> named_parameters();

  Tensor& norm_weight() { return norm_weight_; }
  Tensor& norm_bias() { return norm_bias_; }
  Tensor& head_weight() { return head_weight_; }
  Tensor& head_bias() { return head_bias_; }
  SegDecoder& decoder() { return decoder_; }

 private:
  void check_input(const Tensor& images) const;

  ModelConfig config_;
  std::vector<Stage> stages_;
  Tensor norm_weight_, norm_bias_;  // classify head only
  Tensor head_weight_, head_bias_;
  SegDecoder decoder_;
};

struct ParamShape {
  std::string name;
  Shape shape;
};

/// Names and shapes of every parameter MetaFormer(config) creates, in the
/// same order, without allocating them.
std::vector<ParamShape> parameter_layout(const ModelConfig& config);

/// Same grouping as MetaFormer::count_params, computed from the layout.
ParamBreakdown count_params(const ModelConfig& config);

/// Copies every parameter whose name and shape match from source to target
/// and returns the number of tensors copied.
std::int64_t transfer_matching(MetaFormer& source, MetaFormer& target);

/// Remaps global-attention projections of source onto the attention mixers
/// of target, block by block. Returns the number of remapped blocks.
std::int64_t warm_start_attention(MetaFormer& source, MetaFormer& target);

}  // namespace mf::metaformer
