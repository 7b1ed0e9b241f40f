#include "mf/metaformer/model.hpp"

#include <map>

#include "mf/error.hpp"
#include "mf/tensor/ops.hpp"

namespace mf::metaformer {

namespace {

constexpr double kNormEps = 1e-6;

Tensor ones(std::int64_t n) { return param(Tensor::full({n}, 1.0)); }
Tensor zeros(std::int64_t n) { return param(Tensor::zeros({n})); }

// Applies a [Cout, Cin] linear map over the channel axis of [B, C, H, W].
Tensor channel_linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const auto H = x.size(2), W = x.size(3);
  return from_tokens(linear(to_tokens(x), weight, bias), H, W);
}

std::vector<double> drop_path_factors(std::int64_t batch, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> f(static_cast<std::size_t>(batch));
  for (auto& v : f) v = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  return f;
}

Tensor residual_branch(const Tensor& branch, const Tensor& ls, double drop_prob, bool training, Rng* rng) {
  Tensor scaled = mul_channels(branch, ls);
  if (training && rng != nullptr && drop_prob > 0.0) {
    scaled = mul_samples(scaled, drop_path_factors(scaled.size(0), drop_prob, *rng));
  }
  return scaled;
}

}  // namespace

Block Block::init(const mixers::MixerSpec& spec, std::int64_t channels, std::int64_t mlp_ratio,
                  double layerscale_init, double drop_prob, Padding padding, Rng& rng) {
  Block b;
  const std::int64_t hidden = channels * mlp_ratio;
  b.norm1_weight = ones(channels);
  b.norm1_bias = zeros(channels);
  b.mixer = mixers::TokenMixer(spec, channels, rng, padding);
  b.ls1 = param(Tensor::full({channels}, layerscale_init));
  b.norm2_weight = ones(channels);
  b.norm2_bias = zeros(channels);
  b.fc1_weight = param(trunc_normal({hidden, channels}, 0.02, rng));
  b.fc1_bias = zeros(hidden);
  b.fc2_weight = param(trunc_normal({channels, hidden}, 0.02, rng));
  b.fc2_bias = zeros(channels);
  b.ls2 = param(Tensor::full({channels}, layerscale_init));
  b.drop_prob = drop_prob;
  return b;
}

void Block::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  visit(prefix + "norm1.weight", norm1_weight);
  visit(prefix + "norm1.bias", norm1_bias);
  mixer.visit_parameters(prefix + "mixer.", visit);
  visit(prefix + "ls1", ls1);
  visit(prefix + "norm2.weight", norm2_weight);
  visit(prefix + "norm2.bias", norm2_bias);
  visit(prefix + "mlp.fc1.weight", fc1_weight);
  visit(prefix + "mlp.fc1.bias", fc1_bias);
  visit(prefix + "mlp.fc2.weight", fc2_weight);
  visit(prefix + "mlp.fc2.bias", fc2_bias);
  visit(prefix + "ls2", ls2);
}

Tensor channel_mlp(const Tensor& x, const Block& block) {
  return channel_linear(gelu(channel_linear(x, block.fc1_weight, block.fc1_bias)), block.fc2_weight,
                        block.fc2_bias);
}

Tensor block_forward(const Tensor& x, const Block& block, bool training, Rng* rng,
                     const std::optional<Tensor>& pos_emb) {
  if (x.dim() != 4 || x.size(1) != block.channels()) {
    throw DimensionError("block: input " + shape_str(x.shape()) + " for " + std::to_string(block.channels()) +
                         " channels");
  }
  const Tensor mixed = block.mixer.forward(layer_norm(x, block.norm1_weight, block.norm1_bias, kNormEps), pos_emb);
  const Tensor y = add(x, residual_branch(mixed, block.ls1, block.drop_prob, training, rng));
  const Tensor mlp = channel_mlp(layer_norm(y, block.norm2_weight, block.norm2_bias, kNormEps), block);
  return add(y, residual_branch(mlp, block.ls2, block.drop_prob, training, rng));
}

MetaFormer::MetaFormer(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  for (auto& s : config_.signature) s.heads_divisor = config_.heads_divisor;
  Rng rng(seed);

  std::int64_t total_blocks = 0;
  for (auto d : config_.stage_depths) total_blocks += d;
  std::int64_t block_index = 0;

  std::int64_t in_ch = config_.in_channels;
  for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
    Stage st;
    const std::int64_t C = config_.stage_channels[s];
    const std::int64_t K = s == 0 ? 7 : 3;
    st.embed_stride = s == 0 ? 4 : 2;
    st.embed_padding = s == 0 ? 2 : 1;
    st.embed_weight = param(trunc_normal({C, in_ch, K, K}, 0.02, rng));
    st.embed_bias = param(Tensor::zeros({C}));
    const auto& spec = config_.signature[s];
    if (spec.kind == mixers::MixerKind::global_attn) {
      st.pos_emb = param(trunc_normal({C, config_.stage_height(s), config_.stage_width(s)}, 0.02, rng));
    }
    for (std::int64_t b = 0; b < config_.stage_depths[s]; ++b) {
      const double dp = total_blocks > 1 ? config_.stochastic_depth_max * static_cast<double>(block_index) /
                                               static_cast<double>(total_blocks - 1)
                                         : 0.0;
      st.blocks.push_back(
          Block::init(spec, C, config_.mlp_ratio, config_.layerscale_init, dp, config_.padding, rng));
      ++block_index;
    }
    stages_.push_back(std::move(st));
    in_ch = C;
  }

  const std::int64_t last = config_.stage_channels.back();
  if (config_.head == HeadKind::classify) {
    norm_weight_ = ones(last);
    norm_bias_ = zeros(last);
    head_weight_ = param(trunc_normal({config_.num_classes, last}, 0.02, rng));
    head_bias_ = zeros(config_.num_classes);
  } else {
    const std::int64_t D = config_.decoder_dim;
    for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
      decoder_.proj_weight.push_back(param(trunc_normal({D, config_.stage_channels[s]}, 0.02, rng)));
      decoder_.proj_bias.push_back(zeros(D));
    }
    decoder_.fuse_weight = param(trunc_normal({D, ModelConfig::kStages * D}, 0.02, rng));
    decoder_.fuse_bias = zeros(D);
    decoder_.cls_weight = param(trunc_normal({config_.num_classes, D}, 0.02, rng));
    decoder_.cls_bias = zeros(config_.num_classes);
  }
}

void MetaFormer::check_input(const Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != config_.in_channels) {
    throw DimensionError("model input " + shape_str(images.shape()) + " does not have " +
                         std::to_string(config_.in_channels) + " channels");
  }
  if (images.size(2) % ModelConfig::kTotalStride != 0 || images.size(3) % ModelConfig::kTotalStride != 0) {
    throw DimensionError("model input " + std::to_string(images.size(2)) + "x" + std::to_string(images.size(3)) +
                         " is not divisible by the total stride 32");
  }
}

Tensor MetaFormer::patch_embed(const Tensor& x, std::int64_t stage_index) const {
  if (stage_index < 0 || stage_index >= ModelConfig::kStages) throw DimensionError("patch_embed: bad stage index");
  const Stage& st = stages_[stage_index];
  const std::int64_t stride = st.embed_stride;
  if (x.dim() != 4 || x.size(2) % stride != 0 || x.size(3) % stride != 0) {
    throw DimensionError("patch_embed: input " + shape_str(x.shape()) + " is not divisible by stride " +
                         std::to_string(stride));
  }
  return conv2d(x, st.embed_weight, st.embed_bias,
                {.stride = stride, .padding = st.embed_padding, .groups = 1, .padding_mode = config_.padding});
}

std::vector<Tensor> MetaFormer::forward_features(const Tensor& images, bool training, Rng* rng) const {
  check_input(images);
  std::vector<Tensor> feats;
  Tensor x = images;
  for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
    x = patch_embed(x, s);
    const Stage& st = stages_[s];
    if (st.pos_emb && (x.size(2) != st.pos_emb->size(1) || x.size(3) != st.pos_emb->size(2))) {
      throw DimensionError("stage " + std::to_string(s) + " positional embedding expects " +
                           std::to_string(st.pos_emb->size(1)) + "x" + std::to_string(st.pos_emb->size(2)));
    }
    for (const Block& b : st.blocks) x = block_forward(x, b, training, rng, st.pos_emb);
    feats.push_back(x);
  }
  return feats;
}

Tensor MetaFormer::forward_classify(const Tensor& images, bool training, Rng* rng) const {
  if (config_.head != HeadKind::classify) throw ConfigError("model was built with a segmentation head");
  const auto feats = forward_features(images, training, rng);
  const Tensor normed = layer_norm(feats.back(), norm_weight_, norm_bias_, kNormEps);
  return linear(global_avg_pool(normed), head_weight_, head_bias_);
}

Tensor MetaFormer::forward_segment(const Tensor& images, bool training, Rng* rng) const {
  if (config_.head != HeadKind::segment) throw ConfigError("model was built with a classification head");
  const auto feats = forward_features(images, training, rng);
  const std::int64_t h0 = feats[0].size(2), w0 = feats[0].size(3);
  std::vector<Tensor> projected;
  for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
    const Tensor p = channel_linear(feats[s], decoder_.proj_weight[s], decoder_.proj_bias[s]);
    projected.push_back(bilinear_resize(p, h0, w0));
  }
  const Tensor fused = relu(channel_linear(concat_channels(projected), decoder_.fuse_weight, decoder_.fuse_bias));
  const Tensor logits = channel_linear(fused, decoder_.cls_weight, decoder_.cls_bias);
  return bilinear_resize(logits, images.size(2), images.size(3));
}

Tensor MetaFormer::forward(const Tensor& images, bool training, Rng* rng) const {
  return config_.head == HeadKind::classify ? forward_classify(images, training, rng)
                                            : forward_segment(images, training, rng);
}

void MetaFormer::visit_parameters(const ParameterVisitor& visit) {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    Stage& st = stages_[s];
    const std::string p = "stages." + std::to_string(s) + ".";
    visit(p + "embed.weight", st.embed_weight);
    visit(p + "embed.bias", st.embed_bias);
    if (st.pos_emb) visit(p + "pos_emb", *st.pos_emb);
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      st.blocks[b].visit_parameters(p + "blocks." + std::to_string(b) + ".", visit);
    }
  }
  if (config_.head == HeadKind::classify) {
    visit("norm.weight", norm_weight_);
    visit("norm.bias", norm_bias_);
    visit("head.weight", head_weight_);
    visit("head.bias", head_bias_);
  } else {
    for (std::size_t s = 0; s < decoder_.proj_weight.size(); ++s) {
      visit("decoder.proj." + std::to_string(s) + ".weight", decoder_.proj_weight[s]);
      visit("decoder.proj." + std::to_string(s) + ".bias", decoder_.proj_bias[s]);
    }
    visit("decoder.fuse.weight", decoder_.fuse_weight);
    visit("decoder.fuse.bias", decoder_.fuse_bias);
    visit("decoder.classifier.weight", decoder_.cls_weight);
    visit("decoder.classifier.bias", decoder_.cls_bias);
  }
}

std::vector<NamedTensor> MetaFormer::named_parameters() {
  std::vector<NamedTensor> out;
  visit_parameters([&](const std::string& name, Tensor& t) { out.push_back({name, t}); });
  return out;
}

namespace {

void tally(ParamBreakdown& pb, const std::string& name, std::int64_t n) {
  if (name.find(".mixer.") != std::string::npos) {
    pb.mixers += n;
  } else if (name.find(".pos_emb") != std::string::npos) {
    pb.pos_emb += n;
  } else if (name.rfind("head.", 0) == 0 || name.rfind("decoder.", 0) == 0) {
    pb.head += n;
  } else {
    pb.backbone_ex_mixers += n;
  }
}

}  // namespace

ParamBreakdown MetaFormer::count_params() const {
  ParamBreakdown pb;
  // visit_parameters is non-const only because it hands out mutable handles.
  auto& self = const_cast<MetaFormer&>(*this);
  self.visit_parameters([&](const std::string& name, Tensor& t) { tally(pb, name, t.numel()); });
  return pb;
}

std::vector<ParamShape> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamShape> out;
  std::int64_t in_ch = config.in_channels;
  for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
    const std::int64_t C = config.stage_channels[s];
    const std::int64_t K = s == 0 ? 7 : 3;
    const std::int64_t hidden = C * config.mlp_ratio;
    const std::string p = "stages." + std::to_string(s) + ".";
    out.push_back({p + "embed.weight", {C, in_ch, K, K}});
    out.push_back({p + "embed.bias", {C}});
    const auto& spec = config.signature[s];
    if (spec.kind == mixers::MixerKind::global_attn) {
      out.push_back({p + "pos_emb", {C, config.stage_height(s), config.stage_width(s)}});
    }
    for (std::int64_t b = 0; b < config.stage_depths[s]; ++b) {
      const std::string q = p + "blocks." + std::to_string(b) + ".";
      out.push_back({q + "norm1.weight", {C}});
      out.push_back({q + "norm1.bias", {C}});
      switch (spec.kind) {
        case mixers::MixerKind::conv: out.push_back({q + "mixer.weight", {C, C, spec.kernel, spec.kernel}}); break;
        case mixers::MixerKind::grouped_conv:
          out.push_back({q + "mixer.weight", {C, 1, spec.kernel, spec.kernel}});
          break;
        case mixers::MixerKind::local_attn:
        case mixers::MixerKind::global_attn:
          for (const char* w : {"wq", "wk", "wv", "wu"}) out.push_back({q + "mixer." + w, {C, C}});
          break;
        default: break;
      }
      out.push_back({q + "ls1", {C}});
      out.push_back({q + "norm2.weight", {C}});
      out.push_back({q + "norm2.bias", {C}});
      out.push_back({q + "mlp.fc1.weight", {hidden, C}});
      out.push_back({q + "mlp.fc1.bias", {hidden}});
      out.push_back({q + "mlp.fc2.weight", {C, hidden}});
      out.push_back({q + "mlp.fc2.bias", {C}});
      out.push_back({q + "ls2", {C}});
    }
    in_ch = C;
  }
  const std::int64_t last = config.stage_channels.back();
  if (config.head == HeadKind::classify) {
    out.push_back({"norm.weight", {last}});
    out.push_back({"norm.bias", {last}});
    out.push_back({"head.weight", {config.num_classes, last}});
    out.push_back({"head.bias", {config.num_classes}});
  } else {
    const std::int64_t D = config.decoder_dim;
    for (std::int64_t s = 0; s < ModelConfig::kStages; ++s) {
      out.push_back({"decoder.proj." + std::to_string(s) + ".weight", {D, config.stage_channels[s]}});
      out.push_back({"decoder.proj." + std::to_string(s) + ".bias", {D}});
    }
    out.push_back({"decoder.fuse.weight", {D, ModelConfig::kStages * D}});
    out.push_back({"decoder.fuse.bias", {D}});
    out.push_back({"decoder.classifier.weight", {config.num_classes, D}});
    out.push_back({"decoder.classifier.bias", {config.num_classes}});
  }
  return out;
}

ParamBreakdown count_params(const ModelConfig& config) {
  ParamBreakdown pb;
  for (const auto& p : parameter_layout(config)) tally(pb, p.name, numel(p.shape));
  return pb;
}

std::int64_t transfer_matching(MetaFormer& source, MetaFormer& target) {
  std::map<std::string, Tensor> src;
  for (auto& nt : source.named_parameters()) src.emplace(nt.name, nt.tensor);
  std::int64_t copied = 0;
  target.visit_parameters([&](const std::string& name, Tensor& t) {
    auto it = src.find(name);
    if (it == src.end() || it->second.shape() != t.shape()) return;
    auto d = t.mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), d.begin());
    ++copied;
  });
  return copied;
}

std::int64_t warm_start_attention(MetaFormer& source, MetaFormer& target) {
  auto& ss = source.stages();
  auto& ts = target.stages();
  std::int64_t remapped = 0;
  for (std::size_t s = 0; s < ss.size() && s < ts.size(); ++s) {
    const std::size_t n = std::min(ss[s].blocks.size(), ts[s].blocks.size());
    for (std::size_t b = 0; b < n; ++b) {
      auto& sm = ss[s].blocks[b].mixer;
      auto& tm = ts[s].blocks[b].mixer;
      if (sm.spec().kind != mixers::MixerKind::global_attn || !tm.spec().is_attention()) continue;
      mixers::warm_start_remap(sm.attention(), tm.attention());
      ++remapped;
    }
  }
  return remapped;
}

}  // namespace mf::metaformer
