#include "mf/trainer/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mf/error.hpp"
#include "mf/tensor/ops.hpp"
#include "mf/tensor/tape.hpp"

namespace mf::trainer {

namespace {

struct Layout {
  std::int64_t batch, classes, spatial;
};

Layout layout_of(const Tensor& logits, std::size_t targets, const char* op) {
  if (logits.dim() != 2 && logits.dim() != 4) {
    throw DimensionError(std::string(op) + ": logits must be [B, K] or [B, K, H, W], got " +
                         shape_str(logits.shape()));
  }
  Layout l{logits.size(0), logits.size(1), logits.dim() == 4 ? logits.size(2) * logits.size(3) : 1};
  if (static_cast<std::int64_t>(targets) != l.batch * l.spatial) {
    throw DimensionError(std::string(op) + ": " + std::to_string(targets) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  return l;
}

// Softmax over the class axis at every (b, s).
std::vector<double> class_softmax(const Tensor& logits, const Layout& l) {
  const auto z = logits.data();
  std::vector<double> p(z.size());
  for (std::int64_t b = 0; b < l.batch; ++b) {
    for (std::int64_t s = 0; s < l.spatial; ++s) {
      const std::int64_t base = b * l.classes * l.spatial + s;
      double mx = -INFINITY;
      for (std::int64_t k = 0; k < l.classes; ++k) mx = std::max(mx, z[base + k * l.spatial]);
      double total = 0.0;
      for (std::int64_t k = 0; k < l.classes; ++k) {
        const double e = std::exp(z[base + k * l.spatial] - mx);
        p[base + k * l.spatial] = e;
        total += e;
      }
      for (std::int64_t k = 0; k < l.classes; ++k) p[base + k * l.spatial] /= total;
    }
  }
  return p;
}

}  // namespace

std::vector<double> class_weights(const std::vector<std::int64_t>& counts, double clamp) {
  if (counts.empty()) throw DataError("class weights: no classes");
  if (clamp < 1) throw ConfigError("class weights: clamp must be at least 1");
  std::int64_t max_count = 0;
  for (auto c : counts) {
    if (c < 0) throw DataError("class weights: negative count");
    max_count = std::max(max_count, c);
  }
  if (max_count == 0) throw DataError("class weights: every class count is zero");
  std::vector<double> w;
  for (auto c : counts) {
    w.push_back(c == 0 ? clamp : std::min(clamp, std::sqrt(static_cast<double>(max_count) / static_cast<double>(c))));
  }
  return w;
}

Tensor ce_loss(const Tensor& logits, const std::vector<std::int64_t>& targets, const CeOptions& opts) {
  const Layout l = layout_of(logits, targets.size(), "ce_loss");
  if (!opts.weights.empty() && static_cast<std::int64_t>(opts.weights.size()) != l.classes) {
    throw DimensionError("ce_loss: one weight per class required");
  }
  if (!(opts.smoothing >= 0 && opts.smoothing < 1)) throw ConfigError("ce_loss: smoothing must lie in [0, 1)");
  const auto z = logits.data();
  const double eps = opts.smoothing;
  const double off = eps / static_cast<double>(l.classes);

  double weighted = 0.0, norm = 0.0;
  for (std::int64_t b = 0; b < l.batch; ++b) {
    for (std::int64_t s = 0; s < l.spatial; ++s) {
      const std::int64_t y = targets[b * l.spatial + s];
      if (opts.ignore_index && y == *opts.ignore_index) continue;
      if (y < 0 || y >= l.classes) throw DataError("ce_loss: class id " + std::to_string(y) + " out of range");
      const std::int64_t base = b * l.classes * l.spatial + s;
      double mx = -INFINITY;
      for (std::int64_t k = 0; k < l.classes; ++k) mx = std::max(mx, z[base + k * l.spatial]);
      double total = 0.0;
      for (std::int64_t k = 0; k < l.classes; ++k) total += std::exp(z[base + k * l.spatial] - mx);
      const double lse = mx + std::log(total);
      double loss = 0.0;
      for (std::int64_t k = 0; k < l.classes; ++k) {
        const double q = (k == y ? 1.0 - eps : 0.0) + off;
        loss += q * (lse - z[base + k * l.spatial]);
      }
      const double w = opts.weights.empty() ? 1.0 : opts.weights[y];
      weighted += w * loss;
      norm += w;
    }
  }
  Tensor out = Tensor::scalar(norm > 0 ? weighted / norm : 0.0);
  check_finite(out, "ce_loss");
  if (norm > 0 && Tape::should_record({&logits})) {
    Tape::active()->record(out, [logits = Tensor(logits), targets, opts, l, norm, eps, off](std::span<const double> g) mutable {
      if (!logits.requires_grad()) return;
      const auto p = class_softmax(logits, l);
      auto gz = logits.ensure_grad();
      for (std::int64_t b = 0; b < l.batch; ++b) {
        for (std::int64_t s = 0; s < l.spatial; ++s) {
          const std::int64_t y = targets[b * l.spatial + s];
          if (opts.ignore_index && y == *opts.ignore_index) continue;
          const double w = (opts.weights.empty() ? 1.0 : opts.weights[y]) * g[0] / norm;
          const std::int64_t base = b * l.classes * l.spatial + s;
          for (std::int64_t k = 0; k < l.classes; ++k) {
            const double q = (k == y ? 1.0 - eps : 0.0) + off;
            gz[base + k * l.spatial] += w * (p[base + k * l.spatial] - q);
          }
        }
      }
    });
  }
  return out;
}

Tensor dice_loss(const Tensor& logits, const std::vector<std::int64_t>& targets, bool ignore_background,
                 double delta) {
  const Layout l = layout_of(logits, targets.size(), "dice_loss");
  for (auto y : targets) {
    if (y < 0 || y >= l.classes) throw DataError("dice_loss: class id " + std::to_string(y) + " out of range");
  }
  const auto p = class_softmax(logits, l);
  std::vector<double> inter(l.classes, 0.0), psum(l.classes, 0.0), tsum(l.classes, 0.0);
  for (std::int64_t b = 0; b < l.batch; ++b) {
    for (std::int64_t s = 0; s < l.spatial; ++s) {
      const std::int64_t y = targets[b * l.spatial + s];
      for (std::int64_t k = 0; k < l.classes; ++k) {
        const double pk = p[(b * l.classes + k) * l.spatial + s];
        psum[k] += pk;
        if (k == y) {
          inter[k] += pk;
          tsum[k] += 1.0;
        }
      }
    }
  }
  std::vector<char> used(l.classes, 0);
  std::int64_t n_used = 0;
  double dice_total = 0.0;
  for (std::int64_t k = ignore_background ? 1 : 0; k < l.classes; ++k) {
    if (tsum[k] == 0.0 && psum[k] <= delta) continue;
    used[k] = 1;
    ++n_used;
    dice_total += (2 * inter[k] + delta) / (psum[k] + tsum[k] + delta);
  }
  Tensor out = Tensor::scalar(n_used > 0 ? 1.0 - dice_total / static_cast<double>(n_used) : 0.0);
  check_finite(out, "dice_loss");
  if (n_used > 0 && Tape::should_record({&logits})) {
    Tape::active()->record(out, [logits = Tensor(logits), targets, l, p, inter, psum, tsum, used, n_used,
                                 delta](std::span<const double> g) mutable {
      if (!logits.requires_grad()) return;
      auto gz = logits.ensure_grad();
      std::vector<double> gp(static_cast<std::size_t>(l.classes));
      for (std::int64_t b = 0; b < l.batch; ++b) {
        for (std::int64_t s = 0; s < l.spatial; ++s) {
          const std::int64_t y = targets[b * l.spatial + s];
          double dot = 0.0;
          for (std::int64_t k = 0; k < l.classes; ++k) {
            gp[k] = 0.0;
            if (used[k]) {
              const double den = psum[k] + tsum[k] + delta;
              const double t = k == y ? 1.0 : 0.0;
              gp[k] = -g[0] / static_cast<double>(n_used) * (2 * t * den - (2 * inter[k] + delta)) / (den * den);
            }
            dot += p[(b * l.classes + k) * l.spatial + s] * gp[k];
          }
          for (std::int64_t k = 0; k < l.classes; ++k) {
            const std::int64_t idx = (b * l.classes + k) * l.spatial + s;
            gz[idx] += p[idx] * (gp[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace mf::trainer
