#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dfeia/layers.hpp"

namespace dfeia {

enum class MbmsVariant { dilated, large_kernel };
enum class AttentionVariant { interaction, traditional };

// Frequency-domain feature extraction: per-subband depthwise filtering in the
// Haar domain, reconstructed and added back to the input.
//   Z = IDWT(concat(dw_ll(LL), adw_lh(LH), adw_hl(HL), dw_hh(HH))) + x
// The two detail subbands LH/HL get one-dimensional 1xk / kx1 kernels.
template <typename T>
struct FdfeLayer {
  ConvLayer<T> dw_ll, adw_lh, adw_hl, dw_hh;

  FdfeLayer(const std::string& prefix, int64_t channels, int adw_kernel)
      : dw_ll(ConvLayer<T>::depthwise(prefix + ".dw_ll", channels, 3, 3)),
        adw_lh(ConvLayer<T>::depthwise(prefix + ".adw_lh", channels, 1, adw_kernel)),
        adw_hl(ConvLayer<T>::depthwise(prefix + ".adw_hl", channels, adw_kernel, 1)),
        dw_hh(ConvLayer<T>::depthwise(prefix + ".dw_hh", channels, 3, 3)) {}

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    const int64_t c = x.shape()[1];
    Var<T> s = ops::dwt2(t, x);
    Var<T> ll = dw_ll(t, ops::slice_channels(t, s, 0, c));
    Var<T> lh = adw_lh(t, ops::slice_channels(t, s, c, 2 * c));
    Var<T> hl = adw_hl(t, ops::slice_channels(t, s, 2 * c, 3 * c));
    Var<T> hh = dw_hh(t, ops::slice_channels(t, s, 3 * c, 4 * c));
    Var<T> recon = ops::idwt2(t, ops::concat_channels(t, {ll, lh, hl, hh}));
    return ops::add(t, recon, x);
  }

  void init(Rng& rng) {
    dw_ll.init(rng);
    adw_lh.init(rng);
    adw_hl.init(rng);
    dw_hh.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    dw_ll.collect(out);
    adw_lh.collect(out);
    adw_hl.collect(out);
    dw_hh.collect(out);
  }
};

// Multi-branch multi-scale layer. Expand to 4C, split 2C/C/C, filter each
// branch at a different receptive field, then concat -> GELU -> GRN -> fused
// depthwise -> project, with a residual around the whole thing.
// The default branches reach 3x3/5x5/7x7 receptive fields via dilation; the
// large_kernel variant uses dense 5x5 and 7x7 kernels instead.
template <typename T>
struct MbmsLayer {
  ConvLayer<T> expand, b1, b2, b3;
  GrnLayer<T> grn;
  ConvLayer<T> fuse_dw, project;

  MbmsLayer(const std::string& prefix, int64_t c, MbmsVariant variant)
      : expand(ConvLayer<T>::pointwise(prefix + ".expand", c, 4 * c)),
        b1(ConvLayer<T>::depthwise(prefix + ".b1", 2 * c, 3, 3)),
        b2(variant == MbmsVariant::dilated
               ? ConvLayer<T>::depthwise(prefix + ".b2", c, 3, 3, 2)
               : ConvLayer<T>::depthwise(prefix + ".b2", c, 5, 5)),
        b3(variant == MbmsVariant::dilated
               ? ConvLayer<T>::depthwise(prefix + ".b3", c, 3, 3, 3)
               : ConvLayer<T>::depthwise(prefix + ".b3", c, 7, 7)),
        grn(prefix + ".grn", 4 * c),
        fuse_dw(ConvLayer<T>::depthwise(prefix + ".fuse_dw", 4 * c, 3, 3)),
        project(ConvLayer<T>::pointwise(prefix + ".project", 4 * c, c)) {}

  Var<T> operator()(Tape<T>& t, const Var<T>& z) const {
    const int64_t c = z.shape()[1];
    Var<T> e = expand(t, z);
    Var<T> z1 = b1(t, ops::slice_channels(t, e, 0, 2 * c));
    Var<T> z2 = b2(t, ops::slice_channels(t, e, 2 * c, 3 * c));
    Var<T> z3 = b3(t, ops::slice_channels(t, e, 3 * c, 4 * c));
    Var<T> cat = ops::concat_channels(t, {z1, z2, z3});
    Var<T> fused = fuse_dw(t, grn(t, ops::gelu(t, cat)));
    return ops::add(t, project(t, fused), z);
  }

  void init(Rng& rng) {
    expand.init(rng);
    b1.init(rng);
    b2.init(rng);
    b3.init(rng);
    grn.init(rng);
    fuse_dw.init(rng);
    project.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    expand.collect(out);
    b1.collect(out);
    b2.collect(out);
    b3.collect(out);
    grn.collect(out);
    fuse_dw.collect(out);
    project.collect(out);
  }
};

template <typename T>
struct MsfdBlock {
  FdfeLayer<T> fdfe;
  MbmsLayer<T> mbms;

  MsfdBlock(const std::string& prefix, int64_t channels, int adw_kernel, MbmsVariant variant)
      : fdfe(prefix + ".fdfe", channels, adw_kernel),
        mbms(prefix + ".mbms", channels, variant) {}

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const { return mbms(t, fdfe(t, x)); }

  void init(Rng& rng) {
    fdfe.init(rng);
    mbms.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    fdfe.collect(out);
    mbms.collect(out);
  }
};

// Conditional positional encoding: x' = GRN(DW(x)) + x.
template <typename T>
struct CpeLayer {
  ConvLayer<T> dw;
  GrnLayer<T> grn;

  CpeLayer(const std::string& prefix, int64_t channels)
      : dw(ConvLayer<T>::depthwise(prefix + ".dw", channels, 3, 3)),
        grn(prefix + ".grn", channels) {}

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    return ops::add(t, grn(t, dw(t, x)), x);
  }

  void init(Rng& rng) {
    dw.init(rng);
    grn.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    dw.collect(out);
    grn.collect(out);
  }
};

// Adaptive feature guidance: multi-head attention whose keys and values are
// first aggregated across 3x3 neighborhoods by depthwise convolution, so the
// query interacts with slightly coarser-scale tokens. The traditional
// variant skips the aggregation (plain self-attention, no dw_k/dw_v
// parameters at all).
template <typename T>
struct AfgLayer {
  ConvLayer<T> qkv;
  std::optional<ConvLayer<T>> dw_k, dw_v;
  ConvLayer<T> project;
  int64_t heads;

  AfgLayer(const std::string& prefix, int64_t c, int64_t n_heads, AttentionVariant variant)
      : qkv(ConvLayer<T>::pointwise(prefix + ".qkv", c, 3 * c)),
        project(ConvLayer<T>::pointwise(prefix + ".project", c, c)),
        heads(n_heads) {
    if (n_heads < 1 || c % n_heads != 0) {
      throw ConfigError("attention: channels " + std::to_string(c) +
                        " not divisible by heads " + std::to_string(n_heads));
    }
    if (variant == AttentionVariant::interaction) {
      dw_k.emplace(ConvLayer<T>::depthwise(prefix + ".dw_k", c, 3, 3));
      dw_v.emplace(ConvLayer<T>::depthwise(prefix + ".dw_v", c, 3, 3));
    }
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    const int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const int64_t d = c / heads, hw = h * w;

    Var<T> proj_qkv = qkv(t, x);
    Var<T> q = ops::slice_channels(t, proj_qkv, 0, c);
    Var<T> k = ops::slice_channels(t, proj_qkv, c, 2 * c);
    Var<T> v = ops::slice_channels(t, proj_qkv, 2 * c, 3 * c);
    if (dw_k) k = (*dw_k)(t, k);
    if (dw_v) v = (*dw_v)(t, v);

    // [N,C,H,W] -> [N*heads, HW, d] token layout.
    auto tokens = [&](const Var<T>& u) {
      Var<T> r = ops::reshape(t, u, {n, heads, d, hw});
      r = ops::permute(t, r, {0, 1, 3, 2});
      return ops::reshape(t, r, {n * heads, hw, d});
    };
    Var<T> qt = tokens(q), kt = tokens(k), vt = tokens(v);

    Var<T> scores = ops::scale(t, ops::matmul(t, qt, kt, false, true),
                               static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
    Var<T> attn = ops::softmax(t, scores, 2);
    Var<T> mixed = ops::matmul(t, attn, vt);

    Var<T> r = ops::reshape(t, mixed, {n, heads, hw, d});
    r = ops::permute(t, r, {0, 1, 3, 2});
    r = ops::reshape(t, r, {n, c, h, w});
    return ops::add(t, project(t, r), x);
  }

  void init(Rng& rng) {
    qkv.init(rng);
    if (dw_k) dw_k->init(rng);
    if (dw_v) dw_v->init(rng);
    project.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    qkv.collect(out);
    if (dw_k) dw_k->collect(out);
    if (dw_v) dw_v->collect(out);
    project.collect(out);
  }
};

// Cascade multi-scale layer: expand to 4C, split into four equal groups, and
// chain depthwise filters so each group sees the previous group's output:
//   z'1 = dw1(z1),  z'i = dw_i(z_i + z'_{i-1})
// then concat -> GELU -> GRN -> fused depthwise -> project, plus residual.
template <typename T>
struct CmsfeLayer {
  ConvLayer<T> expand;
  std::vector<ConvLayer<T>> cascade;
  GrnLayer<T> grn;
  ConvLayer<T> fuse_dw, project;

  CmsfeLayer(const std::string& prefix, int64_t c)
      : expand(ConvLayer<T>::pointwise(prefix + ".expand", c, 4 * c)),
        grn(prefix + ".grn", 4 * c),
        fuse_dw(ConvLayer<T>::depthwise(prefix + ".fuse_dw", 4 * c, 3, 3)),
        project(ConvLayer<T>::pointwise(prefix + ".project", 4 * c, c)) {
    cascade.reserve(4);
    for (int i = 0; i < 4; ++i) {
      cascade.push_back(ConvLayer<T>::depthwise(prefix + ".dw" + std::to_string(i + 1), c, 3, 3));
    }
  }

  Var<T> operator()(Tape<T>& t, const Var<T>& z) const {
    const int64_t c = z.shape()[1];
    Var<T> e = expand(t, z);
    std::vector<Var<T>> outs;
    outs.reserve(4);
    Var<T> prev;
    for (int i = 0; i < 4; ++i) {
      Var<T> zi = ops::slice_channels(t, e, i * c, (i + 1) * c);
      if (i > 0) zi = ops::add(t, zi, prev);
      prev = cascade[i](t, zi);
      outs.push_back(prev);
    }
    Var<T> cat = ops::concat_channels(t, outs);
    Var<T> fused = fuse_dw(t, grn(t, ops::gelu(t, cat)));
    return ops::add(t, project(t, fused), z);
  }

  void init(Rng& rng) {
    expand.init(rng);
    for (auto& c : cascade) c.init(rng);
    grn.init(rng);
    fuse_dw.init(rng);
    project.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    expand.collect(out);
    for (auto& c : cascade) c.collect(out);
    grn.collect(out);
    fuse_dw.collect(out);
    project.collect(out);
  }
};

template <typename T>
struct MsiaBlock {
  CpeLayer<T> cpe;
  AfgLayer<T> afg;
  CmsfeLayer<T> cmsfe;

  MsiaBlock(const std::string& prefix, int64_t channels, int64_t heads, AttentionVariant variant)
      : cpe(prefix + ".cpe", channels),
        afg(prefix + ".afg", channels, heads, variant),
        cmsfe(prefix + ".cmsfe", channels) {}

  Var<T> operator()(Tape<T>& t, const Var<T>& x) const {
    return cmsfe(t, afg(t, cpe(t, x)));
  }

  void init(Rng& rng) {
    cpe.init(rng);
    afg.init(rng);
    cmsfe.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    cpe.collect(out);
    afg.collect(out);
    cmsfe.collect(out);
  }
};

}  // namespace dfeia
