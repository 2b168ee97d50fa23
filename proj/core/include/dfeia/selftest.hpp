#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dfeia/blocks.hpp"
#include "dfeia/ops.hpp"
#include "dfeia/random.hpp"
#include "dfeia/tape.hpp"

// Verification machinery shipped with the library so the CLI selftest can run
// it anywhere. The checkers here depend only on forward evaluations (finite
// differences) or on straight-line loop re-implementations, never on the
// backward pass they are judging.
namespace dfeia::selftest {

struct FdOptions {
  double step = 1e-4;
  double tol = 1e-4;           // relative error bound
  int64_t max_per_tensor = 0;  // 0 = check every element
  uint64_t sample_seed = 7;
};

struct FdResult {
  double max_rel_err = 0;
  int64_t checked = 0;
  bool passed = true;
  std::string worst;  // "name[i]" of the worst element
};

// Central-difference check of d(loss)/d(param) for every listed parameter.
// forward must rebuild the same computation on any tape it is handed.
inline FdResult fd_check(const std::vector<Parameter<double>*>& params,
                         const std::function<Var<double>(Tape<double>&)>& forward,
                         const FdOptions& opts = {}) {
  // Analytic gradients.
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    Var<double> loss = forward(tape);
    tape.backward(loss);
  }

  auto eval = [&]() -> double {
    Tape<double> tape(false);
    return forward(tape).value().data()[0];
  };

  FdResult res;
  Rng sample_rng(opts.sample_seed);
  for (auto* p : params) {
    const int64_t n = p->value.numel();
    std::vector<int64_t> indices;
    if (opts.max_per_tensor > 0 && n > opts.max_per_tensor) {
      for (int64_t i = 0; i < opts.max_per_tensor; ++i) {
        indices.push_back(static_cast<int64_t>(sample_rng.below(static_cast<uint64_t>(n))));
      }
    } else {
      indices.resize(n);
      for (int64_t i = 0; i < n; ++i) indices[i] = i;
    }

    for (int64_t i : indices) {
      double* v = p->value.mut();
      const double saved = v[i];
      v[i] = saved + opts.step;
      const double up = eval();
      p->value.mut()[i] = saved - opts.step;
      const double down = eval();
      p->value.mut()[i] = saved;

      const double fd = (up - down) / (2.0 * opts.step);
      const double an = p->grad.data()[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  res.passed = res.max_rel_err <= opts.tol;
  return res;
}

// loss = sum(v * w) with fixed weights, giving every output element a
// distinct influence on the scalar.
inline Var<double> weighted_sum(Tape<double>& t, const Var<double>& v, const Tensor<double>& w) {
  return ops::sum(t, ops::mul(t, v, t.constant(w)));
}

namespace oracle {

// Direct six-nested-loop convolution, double accumulation.
Tensor<double> conv2d_naive(const Tensor<double>& x, const Tensor<double>& w,
                            const Tensor<double>& b, const kernels::Conv2dGeom& g);

Tensor<double> matmul_naive(const Tensor<double>& a, const Tensor<double>& b);

// Plain multi-head self-attention written as straight loops: 1x1 qkv
// projection, per-head softmax(QK^T/sqrt(d))V over all tokens, 1x1 output
// projection, residual. This is what the aggregation-free attention path
// must reproduce.
Tensor<double> attention_naive(const Tensor<double>& x, const Tensor<double>& qkv_w,
                               const Tensor<double>& qkv_b, const Tensor<double>& proj_w,
                               const Tensor<double>& proj_b, int64_t heads);

struct BinaryCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// One-vs-rest reduction by scanning every matrix cell.
BinaryCounts one_vs_rest_naive(const std::vector<int64_t>& matrix, int k, int cls);

// High-precision exact-GELU reference.
double gelu_reference(double x);

}  // namespace oracle

struct SuiteResult {
  std::string name;
  bool passed = true;
  int64_t assertions = 0;
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    ++assertions;
    if (!ok) {
      passed = false;
      failures.push_back(what);
    }
  }
};

struct SelftestOptions {
  bool thorough = false;
  uint64_t seed = 20240501;
};

// Elementwise value checks against independent references; the gelu
// implementation under test is injectable so the harness itself can be
// mutation-tested.
SuiteResult values_suite(const SelftestOptions& opts,
                         std::function<double(double)> gelu_impl = {});
SuiteResult gradient_suite(const SelftestOptions& opts);
SuiteResult wavelet_suite(const SelftestOptions& opts);
SuiteResult attention_suite(const SelftestOptions& opts);
SuiteResult metrics_suite(const SelftestOptions& opts);
SuiteResult serialization_suite(const SelftestOptions& opts);

std::vector<SuiteResult> run_all(const SelftestOptions& opts);

}  // namespace dfeia::selftest
