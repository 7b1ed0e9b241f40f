#include "mf/trainer/config.hpp"

#include "mf/error.hpp"

namespace mf::trainer {

void TrainConfig::validate() const {
  if (!(lr > min_lr && min_lr > 0)) throw ConfigError("train: need lr > min_lr > 0");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("train: label_smoothing must lie in [0, 1)");
  if (!(class_weight_clamp >= 1)) throw ConfigError("train: class_weight_clamp must be at least 1");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be non-negative");
  if (epochs < 1 && max_steps < 1) throw ConfigError("train: need epochs >= 1 or max_steps >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be non-negative");
  if (affine_sigma < 0) throw ConfigError("train: affine_sigma must be non-negative");
  if (patch < 0) throw ConfigError("train: patch must be non-negative");
}

void TrainConfig::write(io::IniDocument& doc) const {
  doc.set("train", "lr", io::format_double(lr));
  doc.set("train", "min_lr", io::format_double(min_lr));
  doc.set("train", "weight_decay", io::format_double(weight_decay));
  doc.set("train", "warmup_epochs", std::to_string(warmup_epochs));
  doc.set("train", "epochs", std::to_string(epochs));
  doc.set("train", "batch_size", std::to_string(batch_size));
  doc.set("train", "max_steps", std::to_string(max_steps));
  doc.set("train", "label_smoothing", io::format_double(label_smoothing));
  doc.set("train", "class_weight_clamp", io::format_double(class_weight_clamp));
  doc.set("train", "seed", std::to_string(seed));
  doc.set("train", "loss", loss == LossKind::ce ? "ce" : "ce_plus_dice");
  doc.set("train", "ignore_background", ignore_background ? "true" : "false");
  doc.set("train", "augment", augment ? "true" : "false");
  doc.set("train", "affine_sigma", io::format_double(affine_sigma));
  doc.set("train", "patch", std::to_string(patch));
  doc.set("train", "grad_alarm", io::format_double(grad_alarm));
  doc.set("train", "beta1", io::format_double(beta1));
  doc.set("train", "beta2", io::format_double(beta2));
  doc.set("train", "adam_eps", io::format_double(adam_eps));
}

TrainConfig TrainConfig::read(const io::IniDocument& doc) {
  TrainConfig c;
  io::SectionReader r(doc, "train");
  c.lr = r.get_double("lr", c.lr);
  c.min_lr = r.get_double("min_lr", c.min_lr);
  c.weight_decay = r.get_double("weight_decay", c.weight_decay);
  c.warmup_epochs = r.get_int("warmup_epochs", c.warmup_epochs);
  c.epochs = r.get_int("epochs", c.epochs);
  c.batch_size = r.get_int("batch_size", c.batch_size);
  c.max_steps = r.get_int("max_steps", c.max_steps);
  c.label_smoothing = r.get_double("label_smoothing", c.label_smoothing);
  c.class_weight_clamp = r.get_double("class_weight_clamp", c.class_weight_clamp);
  const auto seed = r.get_int("seed", static_cast<std::int64_t>(c.seed));
  if (seed < 0) throw ConfigError("train: seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const auto loss = r.get_string("loss", "ce");
  if (loss == "ce") {
    c.loss = LossKind::ce;
  } else if (loss == "ce_plus_dice") {
    c.loss = LossKind::ce_plus_dice;
  } else {
    throw ConfigError("train: loss must be 'ce' or 'ce_plus_dice'");
  }
  c.ignore_background = r.get_bool("ignore_background", c.ignore_background);
  c.augment = r.get_bool("augment", c.augment);
  c.affine_sigma = r.get_double("affine_sigma", c.affine_sigma);
  c.patch = r.get_int("patch", c.patch);
  c.grad_alarm = r.get_double("grad_alarm", c.grad_alarm);
  c.beta1 = r.get_double("beta1", c.beta1);
  c.beta2 = r.get_double("beta2", c.beta2);
  c.adam_eps = r.get_double("adam_eps", c.adam_eps);
  r.finish();
  c.validate();
  return c;
}

}  // namespace mf::trainer
