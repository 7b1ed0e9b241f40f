#include <cstdlib>
#include <limits>

#include "mf/error.hpp"
#include "mf/mixers/mixers.hpp"

namespace mf::mixers {

NeighborhoodMask::NeighborhoodMask(std::int64_t height, std::int64_t width, std::int64_t kernel)
    : height_(height), width_(width), kernel_(kernel) {
  if (kernel < 1) throw ConfigError("neighborhood kernel must be at least 1");
  if (kernel % 2 == 0) throw ConfigError("neighborhood kernel must be odd");
  if (height < 1 || width < 1) throw DimensionError("neighborhood extent must be positive");
}

bool NeighborhoodMask::allowed(std::int64_t query, std::int64_t key) const {
  const std::int64_t qh = query / width_, qw = query % width_;
  const std::int64_t kh = key / width_, kw = key % width_;
  // |i - h| < K/2 compared in integers: 2|d| < K.
  return 2 * std::llabs(qh - kh) < kernel_ && 2 * std::llabs(qw - kw) < kernel_;
}

std::int64_t NeighborhoodMask::allowed_pairs() const {
  std::int64_t n = 0;
  for (std::int64_t q = 0; q < tokens(); ++q)
    for (std::int64_t k = 0; k < tokens(); ++k) n += allowed(q, k) ? 1 : 0;
  return n;
}

Tensor NeighborhoodMask::additive() const {
  const std::int64_t n = tokens();
  Tensor m({n, n});
  auto d = m.mutable_data();
  const double blocked = -std::numeric_limits<double>::infinity();
  for (std::int64_t q = 0; q < n; ++q)
    for (std::int64_t k = 0; k < n; ++k) d[q * n + k] = allowed(q, k) ? 0.0 : blocked;
  return m;
}

NeighborhoodMask build_neighborhood_mask(std::int64_t height, std::int64_t width, std::int64_t kernel) {
  return NeighborhoodMask(height, width, kernel);
}

}  // namespace mf::mixers
