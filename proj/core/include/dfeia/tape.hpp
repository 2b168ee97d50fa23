#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dfeia/kernels.hpp"
#include "dfeia/tensor.hpp"

namespace dfeia {

// A learnable tensor. grad always has the value's shape and accumulates
// across backward passes until zero_grad.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TapeNode {
  Tensor<T> value;
  Tensor<T> grad;  // undefined until backward reaches this node
  std::function<void(TapeNode<T>&)> backward;
  Parameter<T>* param = nullptr;
  const Tape<T>* owner = nullptr;

  void accum(const Tensor<T>& delta) {
    if (!grad.defined()) grad = Tensor<T>(value.shape());
    kernels::accumulate(grad, delta);
  }

  // Grad tensor for in-place accumulation by kernels.
  Tensor<T>& grad_buf() {
    if (!grad.defined()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

}  // namespace detail

// Handle to a value recorded on (or produced outside) a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::TapeNode<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  const std::shared_ptr<detail::TapeNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TapeNode<T>> node_;
};

// Records primitive ops in execution order; backward replays the chain rule
// in exact reverse order. Single-threaded per forward/backward pass.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  // A constant input: participates in forward math, never receives grads.
  Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<detail::TapeNode<T>>();
    n->value = std::move(value);
    return Var<T>(std::move(n));
  }

  // An input whose gradient is wanted (test probes and the like).
  Var<T> input(Tensor<T> value) {
    auto n = std::make_shared<detail::TapeNode<T>>();
    n->value = std::move(value);
    if (recording_) {
      n->owner = this;
      order_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  // Leaf bound to a parameter; backward adds into p.grad.
  Var<T> param(Parameter<T>& p) {
    auto n = std::make_shared<detail::TapeNode<T>>();
    n->value = p.value;
    if (recording_) {
      n->owner = this;
      n->param = &p;
      order_.push_back(n);
      param_leaves_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  // Record an op result; fn propagates this node's grad into its inputs.
  Var<T> make(Tensor<T> value, std::function<void(detail::TapeNode<T>&)> fn) {
    auto n = std::make_shared<detail::TapeNode<T>>();
    n->value = std::move(value);
    if (recording_) {
      n->owner = this;
      n->backward = std::move(fn);
      order_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  size_t size() const { return order_.size(); }

  // Reverse sweep from a scalar loss. Nodes that never receive a gradient are
  // skipped, so parameters unreachable from the loss keep zero grad.
  void backward(const Var<T>& loss) {
    if (!loss.defined() || loss.node()->owner != this) {
      throw UsageError("backward: value was not recorded on this tape");
    }
    if (loss.value().numel() != 1) {
      throw UsageError("backward: loss must be a single scalar, got shape " + shape_str(loss.value().shape()));
    }
    if (swept_) throw UsageError("backward: tape already swept");
    swept_ = true;

    loss.node()->accum(Tensor<T>::full(loss.value().shape(), T(1)));
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      detail::TapeNode<T>& n = **it;
      if (n.backward && n.grad.defined()) n.backward(n);
    }
    for (auto& leaf : param_leaves_) {
      if (leaf->grad.defined()) kernels::accumulate(leaf->param->grad, leaf->grad);
    }
  }

 private:
  bool recording_;
  bool swept_ = false;
  std::vector<std::shared_ptr<detail::TapeNode<T>>> order_;
  std::vector<std::shared_ptr<detail::TapeNode<T>>> param_leaves_;
};

template <typename T>
void zero_grad(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace dfeia
