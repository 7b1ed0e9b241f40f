#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mf/metaformer/model.hpp"

namespace mf::trainer {

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::int64_t step = 0;
  std::map<const void*, std::vector<double>> m, v;
};

/// One AdamW update with decoupled weight decay:
///   w <- w - lr * wd * w - lr * m_hat / (sqrt(v_hat) + eps)
/// Parameters without a gradient buffer are left untouched. A non-finite
/// gradient aborts the whole step with NumericError before any change.
void adamw_step(const std::vector<metaformer::NamedTensor>& params, AdamWState& state, const AdamWOptions& opts);

/// Linear warm-up from 0 to lr over warmup steps, then cosine annealing
/// that reaches min_lr at step total - 1.
double lr_schedule(std::int64_t step, std::int64_t total, std::int64_t warmup, double lr, double min_lr);

}  // namespace mf::trainer
