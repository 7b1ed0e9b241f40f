#include "mf/tensor/init.hpp"

#include <cmath>

namespace mf {

Tensor trunc_normal(Shape shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.mutable_data()) {
    double z = dist(rng);
    while (std::abs(z) > 2.0) z = dist(rng);
    v = z * std;
  }
  return t;
}

Tensor normal(Shape shape, double mean, double std, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(mean, std);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

}  // namespace mf
