#pragma once

#include <random>

#include "mf/tensor/tensor.hpp"

namespace mf {

using Rng = std::mt19937_64;

/// Normal(0, std) truncated to +-2 std by resampling.
Tensor trunc_normal(Shape shape, double std, Rng& rng);
Tensor normal(Shape shape, double mean, double std, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

/// Marks a tensor as a trainable leaf and returns it.
inline Tensor param(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

}  // namespace mf
