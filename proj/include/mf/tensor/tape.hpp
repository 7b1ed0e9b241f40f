#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mf/tensor/tensor.hpp"

namespace mf {

/// Records primitive applications for reverse-mode differentiation.
///
/// Constructing a Tape makes it the active tape of the calling thread until
/// it is destroyed; ops executed while a tape is active record themselves
/// whenever one of their inputs requires a gradient. A Tape is
/// single-threaded and can be replayed exactly once.
class Tape {
 public:
  /// Receives the gradient of the op's output and accumulates into the
  /// gradient buffers of its inputs.
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();
  /// True when an op with these inputs must record itself.
  static bool should_record(std::initializer_list<const Tensor*> inputs);

  void record(Tensor output, BackwardFn fn);
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Entry {
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
  Tape* previous_ = nullptr;
};

/// Backpropagates from a scalar loss over the active tape.
void backward(const Tensor& loss);

/// Temporarily disables recording on this thread (evaluation passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace mf
