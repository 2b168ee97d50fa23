#pragma once

#include <vector>

#include "dfeia/kernels.hpp"
#include "dfeia/tape.hpp"

// Differentiable primitives. Each op computes its value through kernels.hpp
// and, when the tape is recording, registers a closure that routes the
// output gradient back into the input nodes.
namespace dfeia::ops {

using kernels::Conv2dGeom;

template <typename T>
Var<T> conv2d(Tape<T>& t, const Var<T>& x, const Var<T>& w, const Var<T>& b, const Conv2dGeom& g) {
  Tensor<T> out = kernels::conv2d(x.value(), w.value(), b.value(), g);
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return t.make(std::move(out), [xn, wn, bn, g](detail::TapeNode<T>& self) {
    kernels::conv2d_backward(self.grad, xn->value, wn->value, g,
                             &xn->grad_buf(), &wn->grad_buf(), &bn->grad_buf());
  });
}

template <typename T>
Var<T> gelu(Tape<T>& t, const Var<T>& x) {
  Tensor<T> out = kernels::gelu(x.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn](detail::TapeNode<T>& self) {
    kernels::gelu_backward(self.grad, xn->value, &xn->grad_buf());
  });
}

template <typename T>
Var<T> grn(Tape<T>& t, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  Tensor<T> out = kernels::grn(x.value(), gamma.value(), beta.value(), eps);
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return t.make(std::move(out), [xn, gn, bn, eps](detail::TapeNode<T>& self) {
    kernels::grn_backward(self.grad, xn->value, gn->value, eps,
                          &xn->grad_buf(), &gn->grad_buf(), &bn->grad_buf());
  });
}

template <typename T>
Var<T> softmax(Tape<T>& t, const Var<T>& x, int axis) {
  Tensor<T> out = kernels::softmax(x.value(), axis);
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn, axis](detail::TapeNode<T>& self) {
    kernels::softmax_backward(self.grad, self.value, axis, &xn->grad_buf());
  });
}

template <typename T>
Var<T> matmul(Tape<T>& t, const Var<T>& a, const Var<T>& b, bool trans_a = false, bool trans_b = false) {
  Tensor<T> out = kernels::matmul(a.value(), b.value(), trans_a, trans_b);
  if (!t.recording()) return t.constant(std::move(out));
  auto an = a.node(), bn = b.node();
  return t.make(std::move(out), [an, bn, trans_a, trans_b](detail::TapeNode<T>& self) {
    kernels::matmul_backward(self.grad, an->value, bn->value, trans_a, trans_b,
                             &an->grad_buf(), &bn->grad_buf());
  });
}

template <typename T>
Var<T> global_avg_pool(Tape<T>& t, const Var<T>& x) {
  Tensor<T> out = kernels::global_avg_pool(x.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn](detail::TapeNode<T>& self) {
    kernels::global_avg_pool_backward(self.grad, xn->value.shape(), &xn->grad_buf());
  });
}

template <typename T>
Var<T> linear(Tape<T>& t, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  Tensor<T> out = kernels::linear(x.value(), w.value(), b.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return t.make(std::move(out), [xn, wn, bn](detail::TapeNode<T>& self) {
    kernels::linear_backward(self.grad, xn->value, wn->value,
                             &xn->grad_buf(), &wn->grad_buf(), &bn->grad_buf());
  });
}

// Orthonormal transforms are their own adjoints' inverses: the backward of
// dwt2 is idwt2 applied to the gradient, and vice versa.
template <typename T>
Var<T> dwt2(Tape<T>& t, const Var<T>& x) {
  Tensor<T> out = wavelet::dwt2_stacked(x.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn](detail::TapeNode<T>& self) {
    xn->accum(wavelet::idwt2_stacked(self.grad));
  });
}

template <typename T>
Var<T> idwt2(Tape<T>& t, const Var<T>& s) {
  Tensor<T> out = wavelet::idwt2_stacked(s.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto sn = s.node();
  return t.make(std::move(out), [sn](detail::TapeNode<T>& self) {
    sn->accum(wavelet::dwt2_stacked(self.grad));
  });
}

template <typename T>
Var<T> add(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = kernels::add(a.value(), b.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto an = a.node(), bn = b.node();
  return t.make(std::move(out), [an, bn](detail::TapeNode<T>& self) {
    an->accum(self.grad);
    bn->accum(self.grad);
  });
}

template <typename T>
Var<T> mul(Tape<T>& t, const Var<T>& a, const Var<T>& b) {
  Tensor<T> out = kernels::mul(a.value(), b.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto an = a.node(), bn = b.node();
  return t.make(std::move(out), [an, bn](detail::TapeNode<T>& self) {
    an->accum(kernels::mul(self.grad, bn->value));
    bn->accum(kernels::mul(self.grad, an->value));
  });
}

template <typename T>
Var<T> scale(Tape<T>& t, const Var<T>& a, T s) {
  Tensor<T> out = kernels::scale(a.value(), s);
  if (!t.recording()) return t.constant(std::move(out));
  auto an = a.node();
  return t.make(std::move(out), [an, s](detail::TapeNode<T>& self) {
    an->accum(kernels::scale(self.grad, s));
  });
}

template <typename T>
Var<T> sum(Tape<T>& t, const Var<T>& a) {
  Tensor<T> out = kernels::sum_all(a.value());
  if (!t.recording()) return t.constant(std::move(out));
  auto an = a.node();
  return t.make(std::move(out), [an](detail::TapeNode<T>& self) {
    an->accum(Tensor<T>::full(an->value.shape(), self.grad.data()[0]));
  });
}

template <typename T>
Var<T> slice_channels(Tape<T>& t, const Var<T>& x, int64_t c0, int64_t c1) {
  Tensor<T> out = kernels::slice_channels(x.value(), c0, c1);
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn, c0](detail::TapeNode<T>& self) {
    kernels::slice_channels_backward(self.grad, c0, &xn->grad_buf());
  });
}

template <typename T>
Var<T> concat_channels(Tape<T>& t, const std::vector<Var<T>>& parts) {
  std::vector<Tensor<T>> vals;
  vals.reserve(parts.size());
  for (const auto& p : parts) vals.push_back(p.value());
  Tensor<T> out = kernels::concat_channels(vals);
  if (!t.recording()) return t.constant(std::move(out));
  std::vector<std::shared_ptr<detail::TapeNode<T>>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) nodes.push_back(p.node());
  return t.make(std::move(out), [nodes](detail::TapeNode<T>& self) {
    int64_t c0 = 0;
    for (auto& n : nodes) {
      const int64_t cs = n->value.dim(1);
      n->accum(kernels::slice_channels(self.grad, c0, c0 + cs));
      c0 += cs;
    }
  });
}

template <typename T>
Var<T> reshape(Tape<T>& t, const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn](detail::TapeNode<T>& self) {
    xn->accum(self.grad.reshaped(xn->value.shape()));
  });
}

template <typename T>
Var<T> permute(Tape<T>& t, const Var<T>& x, std::vector<int> axes) {
  Tensor<T> out = kernels::permute(x.value(), axes);
  if (!t.recording()) return t.constant(std::move(out));
  auto xn = x.node();
  return t.make(std::move(out), [xn, axes](detail::TapeNode<T>& self) {
    xn->accum(kernels::permute(self.grad, kernels::inverse_permutation(axes)));
  });
}

template <typename T>
Var<T> cross_entropy(Tape<T>& t, const Var<T>& logits, std::vector<int> labels) {
  Tensor<T> out = kernels::cross_entropy(logits.value(), labels);
  if (!t.recording()) return t.constant(std::move(out));
  auto ln = logits.node();
  return t.make(std::move(out), [ln, labels = std::move(labels)](detail::TapeNode<T>& self) {
    kernels::cross_entropy_backward(self.grad, ln->value, labels, &ln->grad_buf());
  });
}

}  // namespace dfeia::ops
