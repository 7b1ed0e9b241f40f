#include "mf/trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mf/error.hpp"
#include "mf/evalrank/metrics.hpp"
#include "mf/io/csv.hpp"
#include "mf/tensor/ops.hpp"
#include "mf/tensor/tape.hpp"
#include "mf/trainer/augment.hpp"
#include "mf/trainer/losses.hpp"
#include "mf/trainer/optim.hpp"

namespace mf::trainer {

using metaformer::MetaFormer;

TrainLog::TrainLog(std::ostream* out) : out_(out) {
  if (out_) *out_ << header() << '\n';
}

std::string TrainLog::header() { return "step,lr,loss,val_f1,max_grad_norm"; }

void TrainLog::append(const LogRow& row) {
  rows_.push_back(row);
  if (!out_) return;
  *out_ << row.step << ',' << io::format_exact(row.lr) << ',' << io::format_exact(row.loss) << ',';
  if (row.val_f1) *out_ << io::format_exact(*row.val_f1);
  *out_ << ',' << io::format_exact(row.max_grad_norm) << '\n';
  out_->flush();
}

bool CheckpointKeeper::offer(MetaFormer& model, double score, std::int64_t step) {
  if (has_best() && !(score > best_score_)) return false;
  best_.clear();
  for (const auto& p : model.named_parameters()) {
    best_.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  }
  best_score_ = score;
  best_step_ = step;
  return true;
}

void CheckpointKeeper::restore(MetaFormer& model) const {
  if (!has_best()) return;
  auto params = model.named_parameters();
  if (params.size() != best_.size()) throw DimensionError("checkpoint keeper: model layout changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto d = params[i].tensor.mutable_data();
    std::copy(best_[i].begin(), best_[i].end(), d.begin());
  }
}

Tensor predict(const MetaFormer& model, const Tensor& images, std::int64_t batch_size) {
  NoGradGuard no_grad;
  const std::int64_t n = images.size(0);
  const std::int64_t plane = images.numel() / n;
  Shape part_shape = images.shape();
  std::vector<double> out;
  Shape out_shape;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const std::int64_t b = std::min(batch_size, n - start);
    part_shape[0] = b;
    Tensor batch(part_shape, std::vector<double>(images.data().begin() + start * plane,
                                                 images.data().begin() + (start + b) * plane));
    const Tensor y = model.forward(batch);
    out.insert(out.end(), y.data().begin(), y.data().end());
    out_shape = y.shape();
  }
  out_shape[0] = n;
  return Tensor(out_shape, std::move(out));
}

namespace {

// Argmax over axis 1 of [N, K] or [N, K, H, W].
std::vector<int> argmax_classes(const Tensor& logits) {
  const std::int64_t n = logits.size(0), k = logits.size(1);
  const std::int64_t s = logits.numel() / (n * k);
  const auto d = logits.data();
  std::vector<int> out(static_cast<std::size_t>(n * s));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t p = 0; p < s; ++p) {
      int best = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        if (d[(i * k + c) * s + p] > d[(i * k + best) * s + p]) best = static_cast<int>(c);
      }
      out[i * s + p] = best;
    }
  }
  return out;
}

std::vector<int> truth_of(const Dataset& data) {
  const auto& src = data.segmentation() ? data.masks : data.labels;
  return std::vector<int>(src.begin(), src.end());
}

}  // namespace

double accuracy(const MetaFormer& model, const Dataset& data, std::int64_t batch_size) {
  const auto pred = argmax_classes(predict(model, data.images, batch_size));
  const auto truth = truth_of(data);
  std::int64_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double validation_score(const MetaFormer& model, const Dataset& data, std::int64_t batch_size) {
  const auto pred = argmax_classes(predict(model, data.images, batch_size));
  const auto truth = truth_of(data);
  if (!data.segmentation()) return evalrank::f1_macro(pred, truth);
  const std::size_t hw = static_cast<std::size_t>(data.height() * data.width());
  double total = 0.0;
  for (std::int64_t i = 0; i < data.size(); ++i) {
    const std::vector<int> p(pred.begin() + i * hw, pred.begin() + (i + 1) * hw);
    const std::vector<int> t(truth.begin() + i * hw, truth.begin() + (i + 1) * hw);
    total += evalrank::dsc(p, t, static_cast<int>(data.num_classes), true);
  }
  return total / static_cast<double>(data.size());
}

namespace {

struct Batch {
  Tensor images;
  std::vector<std::int64_t> targets;
};

Batch make_batch(const Dataset& data, const std::vector<std::int64_t>& idx, const TrainConfig& cfg,
                 const PatchSampler* sampler, Rng& rng) {
  Batch out;
  const std::int64_t C = data.images.size(1);
  const std::int64_t H = data.height(), W = data.width();
  const std::int64_t ph = sampler ? cfg.patch : H, pw = sampler ? cfg.patch : W;
  const auto src = data.images.data();
  std::vector<double> buf;
  for (auto i : idx) {
    PatchCoord pc{i, 0, 0};
    if (sampler) pc = sampler->sample(rng);
    Tensor img({C, ph, pw});
    auto d = img.mutable_data();
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t y = 0; y < ph; ++y) {
        for (std::int64_t x = 0; x < pw; ++x) {
          d[(c * ph + y) * pw + x] = src[((pc.image * C + c) * H + pc.top + y) * W + pc.left + x];
        }
      }
    }
    std::vector<std::int64_t> mask;
    if (data.segmentation()) {
      for (std::int64_t y = 0; y < ph; ++y) {
        for (std::int64_t x = 0; x < pw; ++x) mask.push_back(data.masks[(pc.image * H + pc.top + y) * W + pc.left + x]);
      }
    }
    if (cfg.augment && cfg.affine_sigma > 0) {
      const Affine a = sample_affine(rng, cfg.affine_sigma);
      img = apply_affine(img, a);
      if (data.segmentation()) mask = apply_affine_mask(mask, ph, pw, a, 0);
    }
    buf.insert(buf.end(), img.data().begin(), img.data().end());
    if (data.segmentation()) {
      out.targets.insert(out.targets.end(), mask.begin(), mask.end());
    } else {
      out.targets.push_back(data.labels[pc.image]);
    }
  }
  out.images = Tensor({static_cast<std::int64_t>(idx.size()), C, ph, pw}, std::move(buf));
  return out;
}

}  // namespace

TrainResult train(MetaFormer& model, const Dataset& data, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (data.size() < 1) throw DataError("training set is empty");
  const bool seg = data.segmentation();
  if (seg != (model.config().head == metaformer::HeadKind::segment)) {
    throw ConfigError("model head does not match the dataset task");
  }
  Rng rng(cfg.seed);
  const std::int64_t n = data.size();
  const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * steps_per_epoch;
  const std::int64_t warmup = std::min(cfg.warmup_epochs * steps_per_epoch, total - 1);
  const std::int64_t eval_every = opts.eval_every > 0 ? opts.eval_every : steps_per_epoch;

  CeOptions ce;
  ce.weights = class_weights(data.class_counts(), cfg.class_weight_clamp);
  ce.smoothing = cfg.label_smoothing;
  if (seg && cfg.ignore_background) ce.ignore_index = 0;

  std::optional<PatchSampler> sampler;
  if (seg && cfg.patch > 0) {
    std::vector<std::vector<std::int64_t>> masks;
    const std::int64_t hw = data.height() * data.width();
    for (std::int64_t i = 0; i < n; ++i) masks.emplace_back(data.masks.begin() + i * hw, data.masks.begin() + (i + 1) * hw);
    sampler.emplace(masks, std::vector<std::int64_t>(n, data.height()), std::vector<std::int64_t>(n, data.width()),
                    cfg.patch, cfg.patch);
  }

  auto params = model.named_parameters();
  AdamWState state;
  AdamWOptions adam{cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps};
  CheckpointKeeper keeper;
  TrainResult result;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  for (std::int64_t step = 0; step < total; ++step) {
    std::vector<std::int64_t> idx;
    while (static_cast<std::int64_t>(idx.size()) < std::min(cfg.batch_size, n)) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
      if (cursor == order.size()) break;
    }
    const Batch batch = make_batch(data, idx, cfg, sampler ? &*sampler : nullptr, rng);
    for (auto& p : params) p.tensor.zero_grad();

    adam.lr = lr_schedule(step, total, warmup, cfg.lr, cfg.min_lr);
    double loss_value = 0.0;
    GradNormReport report;
    try {
      Tape tape;
      const Tensor logits = model.forward(batch.images, true, &rng);
      Tensor loss = ce_loss(logits, batch.targets, ce);
      if (cfg.loss == LossKind::ce_plus_dice) loss = add(loss, dice_loss(logits, batch.targets, cfg.ignore_background));
      loss_value = loss.item();
      tape.backward(loss);
      report = grad_norm_monitor(params, cfg.grad_alarm);
      adamw_step(params, state, adam);
    } catch (const NumericError& e) {
      report = grad_norm_monitor(params, cfg.grad_alarm);
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) + "\nlargest gradient norms:\n" +
                         report.describe());
    }

    LogRow row{step, adam.lr, loss_value, std::nullopt, report.max_norm};
    const bool eval_now = opts.validation && ((step + 1) % eval_every == 0 || step + 1 == total);
    if (eval_now) {
      const double score = validation_score(model, *opts.validation);
      row.val_f1 = score;
      keeper.offer(model, score, step);
    }
    if (opts.log) opts.log->append(row);
    result.final_loss = loss_value;
  }
  result.steps = total;
  if (keeper.has_best()) {
    result.best_val = keeper.best_score();
    result.best_step = keeper.best_step();
    if (opts.keep_best) keeper.restore(model);
  }
  for (auto& p : params) p.tensor.zero_grad();
  result.train_accuracy = accuracy(model, data);
  return result;
}

}  // namespace mf::trainer
