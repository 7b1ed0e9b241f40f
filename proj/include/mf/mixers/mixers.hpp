#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mf/tensor/init.hpp"
#include "mf/tensor/ops.hpp"

namespace mf::mixers {

enum class MixerKind { identity, pooling, conv, grouped_conv, local_attn, global_attn };

std::string kind_name(MixerKind kind);
std::vector<MixerKind> all_kinds();

/// Which token mixer to use and its kernel size.
///
/// Text form: "identity", "pool<K>", "conv<K>", "gconv<K>", "lattn<K>",
/// "gattn". heads_divisor fixes the head count M = C / heads_divisor.
struct MixerSpec {
  MixerKind kind = MixerKind::identity;
  std::int64_t kernel = 3;
  std::int64_t heads_divisor = 16;

  bool uses_kernel() const;
  bool is_attention() const;
  /// Checks kernel validity and, for attention, divisibility of channels.
  void validate(std::int64_t channels) const;

  std::string to_string() const;
  static MixerSpec parse(const std::string& text);

  friend bool operator==(const MixerSpec&, const MixerSpec&) = default;
};

/// Allowed (query, key) pairs of local attention: both coordinate offsets
/// strictly below K/2.
class NeighborhoodMask {
 public:
  NeighborhoodMask(std::int64_t height, std::int64_t width, std::int64_t kernel);

  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  std::int64_t kernel() const { return kernel_; }
  std::int64_t tokens() const { return height_ * width_; }

  bool allowed(std::int64_t query, std::int64_t key) const;
  /// Number of allowed keys summed over every query.
  std::int64_t allowed_pairs() const;
  /// [N, N] tensor of 0 (allowed) and -inf (blocked).
  Tensor additive() const;

 private:
  std::int64_t height_, width_, kernel_;
};

NeighborhoodMask build_neighborhood_mask(std::int64_t height, std::int64_t width, std::int64_t kernel);

/// Projection matrices of multi-head self-attention, each [C, C] and
/// bias-free.
struct AttentionParams {
  Tensor wq, wk, wv, wu;

  static AttentionParams init(std::int64_t channels, Rng& rng);
  std::int64_t channels() const { return wq.size(0); }
};

struct AttentionOptions {
  std::int64_t heads_divisor = 16;
  /// Upper bound on B * M * N * N score entries; beyond it a CapacityError
  /// is raised instead of materializing the matrix.
  std::int64_t max_score_elements = std::int64_t{1} << 27;
};

Tensor mix_identity(const Tensor& x);
Tensor mix_pool(const Tensor& x, std::int64_t kernel, Padding mode = Padding::zeros);
/// kernel is [C, C, K, K]; bias-free, stride 1, same padding.
Tensor mix_conv(const Tensor& x, const Tensor& kernel, Padding mode = Padding::zeros);
/// kernel is [C, 1, K, K] (one filter per channel).
Tensor mix_grouped_conv(const Tensor& x, const Tensor& kernel, Padding mode = Padding::zeros);

/// pos_emb, when given, is [C, H, W] and is added to x before projection.
Tensor mix_global_attn(const Tensor& x, const AttentionParams& params, const std::optional<Tensor>& pos_emb,
                       const AttentionOptions& opts = {});
Tensor mix_local_attn(const Tensor& x, const AttentionParams& params, const NeighborhoodMask& mask,
                      const AttentionOptions& opts = {});

/// Attention probabilities [B, M, N, N] of either variant (mask optional).
Tensor attention_weights(const Tensor& x, const AttentionParams& params, const NeighborhoodMask* mask,
                         const AttentionOptions& opts = {});

/// Copies W_q, W_k, W_v, W_u from a global-attention mixer into a
/// local-attention mixer. Values are copied bit-exactly.
void warm_start_remap(const AttentionParams& source, AttentionParams& target);

using ParameterVisitor = std::function<void(const std::string& name, Tensor& tensor)>;

/// A token mixer together with the parameters it owns. Positional
/// embeddings belong to the enclosing stage and are passed to forward().
class TokenMixer {
 public:
  TokenMixer() = default;
  TokenMixer(MixerSpec spec, std::int64_t channels, Rng& rng, Padding padding = Padding::zeros);

  const MixerSpec& spec() const { return spec_; }
  std::int64_t channels() const { return channels_; }

  Tensor forward(const Tensor& x, const std::optional<Tensor>& pos_emb = {}) const;

  /// Trainable parameter count of the mixer itself.
  std::int64_t parameter_count() const;
  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);

  Tensor& kernel() { return kernel_; }
  AttentionParams& attention() { return attn_; }
  const AttentionParams& attention() const { return attn_; }
  AttentionOptions& attention_options() { return attn_opts_; }

 private:
  MixerSpec spec_;
  std::int64_t channels_ = 0;
  Padding padding_ = Padding::zeros;
  Tensor kernel_;
  AttentionParams attn_;
  AttentionOptions attn_opts_;
};

}  // namespace mf::mixers
