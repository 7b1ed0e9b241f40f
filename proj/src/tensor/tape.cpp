#include "mf/tensor/tape.hpp"

#include <unordered_map>

#include "mf/error.hpp"

namespace mf {
namespace {
thread_local Tape* g_active = nullptr;
thread_local bool g_grad_enabled = true;
}  // namespace

Tape::Tape() : previous_(g_active) { g_active = this; }

Tape::~Tape() { g_active = previous_; }

Tape* Tape::active() { return g_grad_enabled ? g_active : nullptr; }

bool grad_mode_enabled() { return g_grad_enabled; }

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) {
  if (active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(Tensor output, BackwardFn fn) {
  if (consumed_) throw TapeError("recording onto a tape that was already replayed");
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward called twice on the same tape");
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("backward requires a scalar loss");
  }
  // Entries are appended in execution order, which is a topological order of
  // the recorded graph; replaying in reverse visits consumers before producers.
  std::size_t last = entries_.size();
  for (std::size_t i = entries_.size(); i-- > 0;) {
    if (entries_[i].output.same_as(loss)) {
      last = i;
      break;
    }
  }
  if (last == entries_.size()) throw TapeError("loss was not recorded on this tape");
  consumed_ = true;

  Tensor root = loss;
  root.ensure_grad()[0] += 1.0;
  for (std::size_t i = last + 1; i-- > 0;) {
    Entry& e = entries_[i];
    if (!e.output.has_grad()) continue;
    e.fn(e.output.grad());
  }
  entries_.clear();
}

void backward(const Tensor& loss) {
  Tape* tape = g_active;
  if (tape == nullptr) throw TapeError("backward called without an active tape");
  tape->backward(loss);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace mf
