#include "mf/trainer/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mf::trainer {

std::string GradNormReport::describe(std::size_t top) const {
  auto sorted = norms;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::isnan(a.second) || a.second > b.second;
  });
  std::string out;
  for (std::size_t i = 0; i < std::min(top, sorted.size()); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", sorted[i].second);
    out += "  " + sorted[i].first + " " + buf + "\n";
  }
  return out;
}

GradNormReport grad_norm_monitor(const std::vector<metaformer::NamedTensor>& params, double threshold) {
  GradNormReport r;
  for (const auto& p : params) {
    double ss = 0.0;
    if (p.tensor.has_grad()) {
      for (double g : p.tensor.grad()) ss += g * g;
    }
    const double n = std::sqrt(ss);
    r.norms.emplace_back(p.name, n);
    if (!std::isfinite(n)) {
      r.alarm = true;
      r.max_norm = n;
      r.max_name = p.name;
    } else if (std::isfinite(r.max_norm) && n > r.max_norm) {
      r.max_norm = n;
      r.max_name = p.name;
    }
    if (n > threshold) r.alarm = true;
  }
  return r;
}

}  // namespace mf::trainer
