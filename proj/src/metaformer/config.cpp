#include "mf/metaformer/config.hpp"

#include "mf/error.hpp"

namespace mf::metaformer {

using mixers::MixerSpec;

std::vector<MixerSpec> parse_signature(const std::string& text, std::int64_t heads_divisor) {
  const auto tokens = io::split(text, ',');
  std::vector<MixerSpec> sig;
  if (tokens.size() == 1) {
    sig.assign(ModelConfig::kStages, MixerSpec::parse(tokens[0]));
  } else if (tokens.size() == static_cast<std::size_t>(ModelConfig::kStages)) {
    for (const auto& t : tokens) sig.push_back(MixerSpec::parse(t));
  } else {
    throw ConfigError("signature '" + text + "': expected one mixer or four comma-separated mixers");
  }
  for (auto& s : sig) s.heads_divisor = heads_divisor;
  return sig;
}

std::string signature_string(const std::vector<MixerSpec>& signature) {
  std::string out;
  for (std::size_t i = 0; i < signature.size(); ++i) out += (i ? "," : "") + signature[i].to_string();
  return out;
}

std::int64_t stage_extent(std::int64_t input, std::int64_t stage) {
  std::int64_t e = input / 4;
  for (std::int64_t i = 0; i < stage; ++i) e /= 2;
  return e;
}

void ModelConfig::validate() const {
  if (stage_channels.size() != kStages || stage_depths.size() != kStages || signature.size() != kStages) {
    throw ConfigError("model: exactly four stages are required");
  }
  for (std::int64_t s = 0; s < kStages; ++s) {
    if (stage_channels[s] < 1 || stage_depths[s] < 0) throw ConfigError("model: invalid stage width or depth");
    signature[s].validate(stage_channels[s]);
  }
  if (mlp_ratio < 1 || in_channels < 1 || num_classes < 1 || decoder_dim < 1) {
    throw ConfigError("model: mlp_ratio, in_channels, num_classes and decoder_dim must be positive");
  }
  if (input_h < 0 || input_w < 0) throw ConfigError("model: negative input size");
  if (input_h % kTotalStride != 0 || input_w % kTotalStride != 0) {
    throw ConfigError("model: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                      " is not divisible by the total stride 32");
  }
  if (layerscale_init < 0 || stochastic_depth_max < 0 || stochastic_depth_max >= 1) {
    throw ConfigError("model: invalid layerscale_init or stochastic_depth_max");
  }
}

std::int64_t ModelConfig::stage_height(std::int64_t stage) const { return stage_extent(input_h, stage); }
std::int64_t ModelConfig::stage_width(std::int64_t stage) const { return stage_extent(input_w, stage); }

void ModelConfig::write(io::IniDocument& doc) const {
  auto list = [](const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  doc.set("model", "channels", list(stage_channels));
  doc.set("model", "depths", list(stage_depths));
  doc.set("model", "signature", signature_string(signature));
  doc.set("model", "heads_divisor", std::to_string(heads_divisor));
  doc.set("model", "mlp_ratio", std::to_string(mlp_ratio));
  doc.set("model", "head", head == HeadKind::classify ? "classify" : "segment");
  doc.set("model", "num_classes", std::to_string(num_classes));
  doc.set("model", "decoder_dim", std::to_string(decoder_dim));
  doc.set("model", "in_channels", std::to_string(in_channels));
  doc.set("model", "input_h", std::to_string(input_h));
  doc.set("model", "input_w", std::to_string(input_w));
  doc.set("model", "layerscale_init", io::format_double(layerscale_init));
  doc.set("model", "stochastic_depth_max", io::format_double(stochastic_depth_max));
  doc.set("model", "padding", padding == Padding::zeros ? "zeros" : "circular");
}

std::string ModelConfig::to_text() const {
  io::IniDocument doc;
  write(doc);
  return doc.to_text();
}

ModelConfig ModelConfig::read(const io::IniDocument& doc) {
  ModelConfig c;
  io::SectionReader r(doc, "model");
  c.stage_channels = r.get_int_list("channels", c.stage_channels);
  c.stage_depths = r.get_int_list("depths", c.stage_depths);
  c.heads_divisor = r.get_int("heads_divisor", c.heads_divisor);
  c.signature = parse_signature(r.get_string("signature", "pool3"), c.heads_divisor);
  c.mlp_ratio = r.get_int("mlp_ratio", c.mlp_ratio);
  const auto head = r.get_string("head", "classify");
  if (head == "classify") {
    c.head = HeadKind::classify;
  } else if (head == "segment") {
    c.head = HeadKind::segment;
  } else {
    throw ConfigError("model: head must be 'classify' or 'segment', got '" + head + "'");
  }
  c.num_classes = r.get_int("num_classes", c.num_classes);
  c.decoder_dim = r.get_int("decoder_dim", c.decoder_dim);
  c.in_channels = r.get_int("in_channels", c.in_channels);
  c.input_h = r.get_int("input_h", c.input_h);
  c.input_w = r.get_int("input_w", c.input_w);
  c.layerscale_init = r.get_double("layerscale_init", c.layerscale_init);
  c.stochastic_depth_max = r.get_double("stochastic_depth_max", c.stochastic_depth_max);
  const auto pad = r.get_string("padding", "zeros");
  if (pad == "zeros") {
    c.padding = Padding::zeros;
  } else if (pad == "circular") {
    c.padding = Padding::circular;
  } else {
    throw ConfigError("model: padding must be 'zeros' or 'circular'");
  }
  r.finish();
  c.validate();
  return c;
}

ModelConfig ModelConfig::parse(const std::string& text) { return read(io::IniDocument::parse(text)); }

}  // namespace mf::metaformer
