#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mf {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float64 array with an optional gradient buffer.
///
/// Tensor is a cheap handle: copies share storage. Use clone() for a deep
/// copy. Image tensors use the (batch, channels, height, width) layout.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor from(Shape shape, std::initializer_list<double> values);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::int64_t dim() const { return static_cast<std::int64_t>(shape().size()); }
  std::int64_t size(std::int64_t axis) const;
  std::int64_t numel() const;

  std::span<const double> data() const;
  // Mutation is reserved for ops that produce the tensor and for the
  // optimizer, which owns parameters during a step.
  std::span<double> mutable_data();

  double item() const;
  double at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  /// Allocates a zero gradient buffer if none exists and returns it.
  std::span<double> ensure_grad();
  void zero_grad();
  Tensor grad_tensor() const;

  Tensor clone() const;
  /// Same storage identity as another handle.
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace mf
