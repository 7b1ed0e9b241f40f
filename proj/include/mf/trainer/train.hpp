#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mf/metaformer/model.hpp"
#include "mf/trainer/config.hpp"
#include "mf/trainer/data.hpp"
#include "mf/trainer/monitor.hpp"

namespace mf::trainer {

struct LogRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> val_f1;
  double max_grad_norm = 0.0;
};

/// Append-only CSV: step,lr,loss,val_f1,max_grad_norm.
class TrainLog {
 public:
  explicit TrainLog(std::ostream* out = nullptr);
  void append(const LogRow& row);
  const std::vector<LogRow>& rows() const { return rows_; }
  static std::string header();

 private:
  std::ostream* out_;
  std::vector<LogRow> rows_;
};

/// Keeps a copy of the parameters with the highest validation score.
class CheckpointKeeper {
 public:
  /// Returns true when score improves on the best so far.
  bool offer(metaformer::MetaFormer& model, double score, std::int64_t step);
  void restore(metaformer::MetaFormer& model) const;
  bool has_best() const { return !best_.empty(); }
  double best_score() const { return best_score_; }
  std::int64_t best_step() const { return best_step_; }

 private:
  std::vector<std::vector<double>> best_;
  double best_score_ = -1.0;
  std::int64_t best_step_ = -1;
};

struct TrainResult {
  std::int64_t steps = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;  // pixel accuracy for segmentation
  std::optional<double> best_val;
  std::int64_t best_step = -1;
};

struct TrainOptions {
  const Dataset* validation = nullptr;
  /// Validation every this many steps; 0 means once per epoch.
  std::int64_t eval_every = 0;
  TrainLog* log = nullptr;
  /// Restore the best validation checkpoint at the end.
  bool keep_best = true;
};

/// Minibatch training with AdamW and the warm-up/cosine schedule. Deterministic for a fixed config seed. Throws NumericError on
/// a non-finite loss or gradient, after reporting gradient norms to the log
/// stream if one is attached.
TrainResult train(metaformer::MetaFormer& model, const Dataset& data, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

/// Eval-mode forward in batches: [N, K] scores or [N, K, H, W] logits.
Tensor predict(const metaformer::MetaFormer& model, const Tensor& images, std::int64_t batch_size = 16);

/// Accuracy of argmax predictions (pixel accuracy for segmentation).
double accuracy(const metaformer::MetaFormer& model, const Dataset& data, std::int64_t batch_size = 16);

/// Macro-F1 for classification, mean per-case DSC for segmentation.
double validation_score(const metaformer::MetaFormer& model, const Dataset& data, std::int64_t batch_size = 16);

}  // namespace mf::trainer
