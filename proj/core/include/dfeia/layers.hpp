#pragma once

#include <string>
#include <vector>

#include "dfeia/ops.hpp"
#include "dfeia/random.hpp"
#include "dfeia/tape.hpp"

namespace dfeia {

constexpr double kGrnEps = 1e-6;
constexpr double kInitStd = 0.02;

template <typename T>
struct ConvLayer {
  Parameter<T> weight;
  Parameter<T> bias;
  kernels::Conv2dGeom geom;

  ConvLayer(const std::string& prefix, int64_t cout, int64_t cin_per_group,
            int64_t kh, int64_t kw, kernels::Conv2dGeom g)
      : weight(prefix + ".weight", Tensor<T>({cout, cin_per_group, kh, kw})),
        bias(prefix + ".bias", Tensor<T>({cout})),
        geom(g) {}

  // Depthwise helper: groups = channels, pad chosen so spatial size is kept
  // for stride 1 (pad = dilation*(k-1)/2 per axis).
  static ConvLayer depthwise(const std::string& prefix, int64_t channels, int64_t kh, int64_t kw,
                             int64_t dilation = 1) {
    kernels::Conv2dGeom g;
    g.groups = channels;
    g.dil_h = g.dil_w = dilation;
    g.pad_h = dilation * (kh - 1) / 2;
    g.pad_w = dilation * (kw - 1) / 2;
    return ConvLayer(prefix, channels, 1, kh, kw, g);
  }

  static ConvLayer pointwise(const std::string& prefix, int64_t cin, int64_t cout) {
    return ConvLayer(prefix, cout, cin, 1, 1, kernels::Conv2dGeom{});
  }

  void init(Rng& rng) {
    T* w = weight.value.mut();
    for (int64_t i = 0; i < weight.value.numel(); ++i) {
      w[i] = static_cast<T>(rng.trunc_normal(kInitStd));
    }
    bias.value.fill(T(0));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    auto& self = const_cast<ConvLayer&>(*this);
    return ops::conv2d(t, x, t.param(self.weight), t.param(self.bias), geom);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename T>
struct GrnLayer {
  Parameter<T> gamma;
  Parameter<T> beta;

  GrnLayer(const std::string& prefix, int64_t channels)
      : gamma(prefix + ".gamma", Tensor<T>({channels})),
        beta(prefix + ".beta", Tensor<T>({channels})) {}

  // Zero-initialized GRN is the identity map.
  void init(Rng&) {
    gamma.value.fill(T(0));
    beta.value.fill(T(0));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    auto& self = const_cast<GrnLayer&>(*this);
    return ops::grn(t, x, t.param(self.gamma), t.param(self.beta), kGrnEps);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <typename T>
struct LinearLayer {
  Parameter<T> weight;
  Parameter<T> bias;

  LinearLayer(const std::string& prefix, int64_t out_features, int64_t in_features)
      : weight(prefix + ".weight", Tensor<T>({out_features, in_features})),
        bias(prefix + ".bias", Tensor<T>({out_features})) {}

  void init(Rng& rng) {
    T* w = weight.value.mut();
    for (int64_t i = 0; i < weight.value.numel(); ++i) {
      w[i] = static_cast<T>(rng.trunc_normal(kInitStd));
    }
    bias.value.fill(T(0));
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    auto& self = const_cast<LinearLayer&>(*this);
    return ops::linear(t, x, t.param(self.weight), t.param(self.bias));
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

}  // namespace dfeia
