#include "mf/mixers/mixers.hpp"

#include <cmath>

#include "mf/error.hpp"

namespace mf::mixers {

std::string kind_name(MixerKind kind) {
  switch (kind) {
    case MixerKind::identity: return "identity";
    case MixerKind::pooling: return "pooling";
    case MixerKind::conv: return "conv";
    case MixerKind::grouped_conv: return "grouped_conv";
    case MixerKind::local_attn: return "local_attn";
    case MixerKind::global_attn: return "global_attn";
  }
  return "unknown";
}

std::vector<MixerKind> all_kinds() {
  return {MixerKind::identity, MixerKind::pooling, MixerKind::grouped_conv,
          MixerKind::local_attn, MixerKind::conv, MixerKind::global_attn};
}

bool MixerSpec::uses_kernel() const {
  return kind == MixerKind::pooling || kind == MixerKind::conv || kind == MixerKind::grouped_conv ||
         kind == MixerKind::local_attn;
}

bool MixerSpec::is_attention() const {
  return kind == MixerKind::local_attn || kind == MixerKind::global_attn;
}

void MixerSpec::validate(std::int64_t channels) const {
  if (uses_kernel() && (kernel < 3 || kernel % 2 == 0)) {
    throw ConfigError(to_string() + ": kernel must be odd and at least 3");
  }
  if (is_attention()) {
    if (heads_divisor < 1 || channels % heads_divisor != 0 || channels / heads_divisor < 1) {
      throw ConfigError(to_string() + ": " + std::to_string(channels) +
                        " channels are not divisible into heads of size " + std::to_string(heads_divisor));
    }
  }
}

std::string MixerSpec::to_string() const {
  const std::string k = std::to_string(kernel);
  switch (kind) {
    case MixerKind::identity: return "identity";
    case MixerKind::pooling: return "pool" + k;
    case MixerKind::conv: return "conv" + k;
    case MixerKind::grouped_conv: return "gconv" + k;
    case MixerKind::local_attn: return "lattn" + k;
    case MixerKind::global_attn: return "gattn";
  }
  return "?";
}

MixerSpec MixerSpec::parse(const std::string& text) {
  MixerSpec s;
  auto with_kernel = [&](const std::string& prefix, MixerKind kind) -> bool {
    if (text.rfind(prefix, 0) != 0) return false;
    const std::string digits = text.substr(prefix.size());
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("mixer '" + text + "': expected a kernel size after '" + prefix + "'");
    }
    s.kind = kind;
    s.kernel = std::stoll(digits);
    return true;
  };
  if (text == "identity") {
    s.kind = MixerKind::identity;
    s.kernel = 1;
  } else if (text == "gattn") {
    s.kind = MixerKind::global_attn;
    s.kernel = 0;
  } else if (!with_kernel("pool", MixerKind::pooling) && !with_kernel("gconv", MixerKind::grouped_conv) &&
             !with_kernel("conv", MixerKind::conv) && !with_kernel("lattn", MixerKind::local_attn)) {
    throw ConfigError("unknown mixer '" + text + "'");
  }
  if (s.uses_kernel() && (s.kernel < 3 || s.kernel % 2 == 0)) {
    throw ConfigError("mixer '" + text + "': kernel must be odd and at least 3");
  }
  return s;
}

AttentionParams AttentionParams::init(std::int64_t channels, Rng& rng) {
  AttentionParams p;
  p.wq = param(trunc_normal({channels, channels}, 0.02, rng));
  p.wk = param(trunc_normal({channels, channels}, 0.02, rng));
  p.wv = param(trunc_normal({channels, channels}, 0.02, rng));
  p.wu = param(trunc_normal({channels, channels}, 0.02, rng));
  return p;
}

Tensor mix_identity(const Tensor& x) { return x; }

Tensor mix_pool(const Tensor& x, std::int64_t kernel, Padding mode) {
  if (kernel % 2 == 0) throw ConfigError("pool mixer: kernel must be odd");
  return avg_pool2d(x, kernel, 1, (kernel - 1) / 2, mode);
}

Tensor mix_conv(const Tensor& x, const Tensor& kernel, Padding mode) {
  if (x.dim() != 4 || kernel.dim() != 4 || kernel.size(0) != x.size(1) || kernel.size(1) != x.size(1)) {
    throw DimensionError("conv mixer: kernel " + shape_str(kernel.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  const auto K = kernel.size(2);
  return conv2d(x, kernel, std::nullopt, {.stride = 1, .padding = (K - 1) / 2, .groups = 1, .padding_mode = mode});
}

Tensor mix_grouped_conv(const Tensor& x, const Tensor& kernel, Padding mode) {
  if (x.dim() != 4 || kernel.dim() != 4 || kernel.size(0) != x.size(1) || kernel.size(1) != 1) {
    throw DimensionError("grouped conv mixer: kernel " + shape_str(kernel.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  const auto K = kernel.size(2);
  return conv2d(x, kernel, std::nullopt,
                {.stride = 1, .padding = (K - 1) / 2, .groups = x.size(1), .padding_mode = mode});
}

namespace {

struct AttentionResult {
  Tensor output;
  Tensor weights;
};

AttentionResult attention(const Tensor& x, const AttentionParams& p, const NeighborhoodMask* mask,
                          const AttentionOptions& opts) {
  if (x.dim() != 4) throw DimensionError("attention mixer: expected [B, C, H, W], got " + shape_str(x.shape()));
  const std::int64_t B = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  const std::int64_t N = H * W;
  for (const Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wu}) {
    if (w->shape() != Shape{C, C}) {
      throw DimensionError("attention mixer: projection " + shape_str(w->shape()) + " for " +
                           std::to_string(C) + " channels");
    }
  }
  if (opts.heads_divisor < 1 || C % opts.heads_divisor != 0) {
    throw ConfigError("attention mixer: " + std::to_string(C) + " channels are not divisible into heads of size " +
                      std::to_string(opts.heads_divisor));
  }
  const std::int64_t M = C / opts.heads_divisor;
  const std::int64_t D = C / M;
  if (B * M * N * N > opts.max_score_elements) {
    throw CapacityError("attention mixer: score matrix of " + std::to_string(B * M * N * N) +
                        " entries exceeds the capacity of " + std::to_string(opts.max_score_elements));
  }
  if (mask != nullptr && (mask->height() != H || mask->width() != W)) {
    throw DimensionError("attention mixer: neighborhood mask built for a different extent");
  }

  const Tensor tokens = to_tokens(x);  // [B, N, C]
  auto heads = [&](const Tensor& t) { return permute(reshape(t, {B, N, M, D}), {0, 2, 1, 3}); };
  // Queries are pre-scaled by 1/sqrt(D) before the dot product.
  const Tensor q = heads(scale(linear(tokens, p.wq, std::nullopt), 1.0 / std::sqrt(static_cast<double>(D))));
  const Tensor k = heads(linear(tokens, p.wk, std::nullopt));
  const Tensor v = heads(linear(tokens, p.wv, std::nullopt));

  const Tensor scores = matmul(q, k, /*transpose_b=*/true);  // [B, M, N, N]
  const Tensor probs = mask != nullptr ? softmax(scores, -1, mask->additive()) : softmax(scores, -1);
  const Tensor z = matmul(probs, v);  // [B, M, N, D]
  const Tensor merged = reshape(permute(z, {0, 2, 1, 3}), {B, N, C});
  const Tensor out = linear(merged, p.wu, std::nullopt);
  return {from_tokens(out, H, W), probs};
}

Tensor with_position(const Tensor& x, const std::optional<Tensor>& pos_emb) {
  if (!pos_emb) return x;
  if (x.dim() != 4 || pos_emb->shape() != Shape{x.size(1), x.size(2), x.size(3)}) {
    throw DimensionError("positional embedding " + shape_str(pos_emb->shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  return add_broadcast(x, *pos_emb);
}

}  // namespace

Tensor mix_global_attn(const Tensor& x, const AttentionParams& params, const std::optional<Tensor>& pos_emb,
                       const AttentionOptions& opts) {
  return attention(with_position(x, pos_emb), params, nullptr, opts).output;
}

Tensor mix_local_attn(const Tensor& x, const AttentionParams& params, const NeighborhoodMask& mask,
                      const AttentionOptions& opts) {
  return attention(x, params, &mask, opts).output;
}

Tensor attention_weights(const Tensor& x, const AttentionParams& params, const NeighborhoodMask* mask,
                         const AttentionOptions& opts) {
  return attention(x, params, mask, opts).weights;
}

void warm_start_remap(const AttentionParams& source, AttentionParams& target) {
  const std::pair<const Tensor*, Tensor*> pairs[] = {
      {&source.wq, &target.wq}, {&source.wk, &target.wk}, {&source.wv, &target.wv}, {&source.wu, &target.wu}};
  for (const auto& [src, dst] : pairs) {
    if (!src->defined() || !dst->defined() || src->shape() != dst->shape()) {
      throw DimensionError("warm start: attention projection shapes differ between source and target");
    }
  }
  for (const auto& [src, dst] : pairs) {
    auto d = dst->mutable_data();
    std::copy(src->data().begin(), src->data().end(), d.begin());
  }
}

TokenMixer::TokenMixer(MixerSpec spec, std::int64_t channels, Rng& rng, Padding padding)
    : spec_(spec), channels_(channels), padding_(padding) {
  spec_.validate(channels);
  attn_opts_.heads_divisor = spec_.heads_divisor;
  const std::int64_t K = spec_.kernel;
  switch (spec_.kind) {
    case MixerKind::conv:
      kernel_ = param(trunc_normal({channels, channels, K, K}, 0.02, rng));
      break;
    case MixerKind::grouped_conv:
      kernel_ = param(trunc_normal({channels, 1, K, K}, 0.02, rng));
      break;
    case MixerKind::local_attn:
    case MixerKind::global_attn:
      attn_ = AttentionParams::init(channels, rng);
      break;
    case MixerKind::identity:
    case MixerKind::pooling:
      break;
  }
}

Tensor TokenMixer::forward(const Tensor& x, const std::optional<Tensor>& pos_emb) const {
  switch (spec_.kind) {
    case MixerKind::identity: return mix_identity(x);
    case MixerKind::pooling: return mix_pool(x, spec_.kernel, padding_);
    case MixerKind::conv: return mix_conv(x, kernel_, padding_);
    case MixerKind::grouped_conv: return mix_grouped_conv(x, kernel_, padding_);
    case MixerKind::global_attn: return mix_global_attn(x, attn_, pos_emb, attn_opts_);
    case MixerKind::local_attn:
      return mix_local_attn(x, attn_, build_neighborhood_mask(x.size(2), x.size(3), spec_.kernel), attn_opts_);
  }
  return x;
}

std::int64_t TokenMixer::parameter_count() const {
  switch (spec_.kind) {
    case MixerKind::conv:
    case MixerKind::grouped_conv: return kernel_.numel();
    case MixerKind::local_attn:
    case MixerKind::global_attn: return attn_.wq.numel() + attn_.wk.numel() + attn_.wv.numel() + attn_.wu.numel();
    default: return 0;
  }
}

void TokenMixer::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  switch (spec_.kind) {
    case MixerKind::conv:
    case MixerKind::grouped_conv: visit(prefix + "weight", kernel_); break;
    case MixerKind::local_attn:
    case MixerKind::global_attn:
      visit(prefix + "wq", attn_.wq);
      visit(prefix + "wk", attn_.wk);
      visit(prefix + "wv", attn_.wv);
      visit(prefix + "wu", attn_.wu);
      break;
    default: break;
  }
}

}  // namespace mf::mixers
