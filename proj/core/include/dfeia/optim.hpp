#pragma once

#include <cmath>
#include <vector>

#include "dfeia/tape.hpp"

namespace dfeia {

struct AdamWOptions {
  double lr = 0.0005;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW with decoupled weight decay:
//   m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
//   mhat = m/(1-b1^t)           vhat = v/(1-b2^t)
//   theta <- theta - lr*wd*theta - lr*mhat/(sqrt(vhat)+eps)
// The decay term uses the pre-step theta and never touches m/v.
template <typename T>
class AdamW {
 public:
  AdamW(const std::vector<Parameter<T>*>& params, AdamWOptions opts = {}) : opts_(opts) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  int64_t step_count() const { return t_; }
  const AdamWOptions& options() const { return opts_; }

  void step(const std::vector<Parameter<T>*>& params) { step(params, opts_.lr); }

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    if (params.size() != m_.size()) {
      throw UsageError("adamw: parameter set does not match optimizer state");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      if (!p.grad.same_shape(p.value)) {
        throw UsageError("adamw: missing gradient for " + p.name);
      }
      T* theta = p.value.mut();
      const T* g = p.grad.data();
      T* m = m_[i].mut();
      T* v = v_[i].mut();
      for (int64_t j = 0; j < p.value.numel(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = opts_.beta1 * static_cast<double>(m[j]) + (1.0 - opts_.beta1) * gj;
        const double vj = opts_.beta2 * static_cast<double>(v[j]) + (1.0 - opts_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double mhat = mj / bc1;
        const double vhat = vj / bc2;
        const double th = static_cast<double>(theta[j]);
        theta[j] = static_cast<T>(th - lr * opts_.weight_decay * th -
                                  lr * mhat / (std::sqrt(vhat) + opts_.eps));
      }
    }
  }

 private:
  AdamWOptions opts_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace dfeia
