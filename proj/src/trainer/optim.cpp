#include "mf/trainer/optim.hpp"

#include <cmath>
#include <numbers>

#include "mf/error.hpp"

namespace mf::trainer {

void adamw_step(const std::vector<metaformer::NamedTensor>& params, AdamWState& state, const AdamWOptions& opts) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p.name + "; optimizer step aborted");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    Tensor t = p.tensor;
    const auto g = t.grad();
    auto w = t.mutable_data();
    auto& m = state.m[t.id()];
    auto& v = state.v[t.id()];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1 - opts.beta1) * g[i];
      v[i] = opts.beta2 * v[i] + (1 - opts.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= opts.lr * opts.weight_decay * w[i];
      w[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

double lr_schedule(std::int64_t step, std::int64_t total, std::int64_t warmup, double lr, double min_lr) {
  if (total < 1) throw ConfigError("lr schedule: total steps must be positive");
  if (warmup < 0 || warmup >= total) throw ConfigError("lr schedule: warm-up must be shorter than training");
  if (step < 0 || step >= total) throw ConfigError("lr schedule: step out of range");
  if (step < warmup) return lr * static_cast<double>(step) / static_cast<double>(warmup);
  const std::int64_t span = total - 1 - warmup;
  if (span == 0) return lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
  return min_lr + 0.5 * (lr - min_lr) * (1 + std::cos(std::numbers::pi * progress));
}

}  // namespace mf::trainer
