#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mf/metaformer/model.hpp"

namespace mf::trainer {

struct GradNormReport {
  std::vector<std::pair<std::string, double>> norms;  // parameter order
  double max_norm = 0.0;
  std::string max_name;
  bool alarm = false;  // some norm exceeds the threshold (or is not finite)

  std::string describe(std::size_t top = 5) const;
};

/// L2 norm of every parameter gradient; parameters without a gradient count
/// as zero.
GradNormReport grad_norm_monitor(const std::vector<metaformer::NamedTensor>& params, double threshold);

}  // namespace mf::trainer
