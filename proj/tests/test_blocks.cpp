#include <doctest.h>

#include "dfeia/blocks.hpp"
#include "dfeia/random.hpp"
#include "dfeia/selftest.hpp"
#include "dfeia/wavelet.hpp"

using namespace dfeia;

namespace {

template <typename Block>
Tensor<double> run_block(const Block& block, const Tensor<double>& x) {
  Tape<double> t(false);
  return block(t, t.constant(x)).value();
}

void randomize(std::vector<Parameter<double>*> params, Rng& rng) {
  for (auto* p : params) {
    double* v = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) v[i] = rng.uniform(-0.4, 0.4);
  }
}

void set_delta(Parameter<double>& w) {
  w.value.fill(0.0);
  for (int64_t c = 0; c < w.value.dim(0); ++c) {
    w.value.set({c, 0, w.value.dim(2) / 2, w.value.dim(3) / 2}, 1.0);
  }
}

Tensor<double> conv_layer_oracle(const ConvLayer<double>& layer, const Tensor<double>& x) {
  return selftest::oracle::conv2d_naive(x, layer.weight.value, layer.bias.value, layer.geom);
}

Tensor<double> gelu_oracle(const Tensor<double>& x) {
  Tensor<double> out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    out.mut()[i] = selftest::oracle::gelu_reference(x.data()[i]);
  }
  return out;
}

// GRN straight from the formula.
Tensor<double> grn_layer_oracle(const GrnLayer<double>& layer, const Tensor<double>& x) {
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<double> out(x.shape());
  for (int64_t ni = 0; ni < n; ++ni) {
    std::vector<double> norms(c);
    double mean = 0;
    for (int64_t ci = 0; ci < c; ++ci) {
      double ss = 0;
      for (int64_t i = 0; i < plane; ++i) {
        const double v = x.data()[(ni * c + ci) * plane + i];
        ss += v * v;
      }
      norms[ci] = std::sqrt(ss);
      mean += norms[ci];
    }
    mean /= static_cast<double>(c);
    for (int64_t ci = 0; ci < c; ++ci) {
      const double nc = norms[ci] / (mean + kGrnEps);
      for (int64_t i = 0; i < plane; ++i) {
        const double v = x.data()[(ni * c + ci) * plane + i];
        out.mut()[(ni * c + ci) * plane + i] =
            layer.gamma.value.data()[ci] * v * nc + layer.beta.value.data()[ci] + v;
      }
    }
  }
  return out;
}

Tensor<double> slice_oracle(const Tensor<double>& x, int64_t c0, int64_t c1) {
  return kernels::slice_channels(x, c0, c1);
}

}  // namespace

TEST_CASE("fdfe: delta kernels double the input, zero kernels pass it through") {
  Rng rng(50);
  FdfeLayer<double> fdfe("fdfe", 8, 9);
  std::vector<Parameter<double>*> params;
  fdfe.collect(params);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 6, 6}, -1.0, 1.0);

  // Delta on every subband: IDWT(DWT(x)) + x = 2x.
  set_delta(fdfe.dw_ll.weight);
  set_delta(fdfe.dw_hh.weight);
  set_delta(fdfe.adw_lh.weight);
  set_delta(fdfe.adw_hl.weight);
  for (auto* p : params) {
    if (p->name.find("bias") != std::string::npos) p->value.fill(0.0);
  }
  CHECK(max_abs_diff(run_block(fdfe, x), kernels::scale(x, 2.0)) < 1e-6);

  // All-zero kernels and biases: the residual path alone.
  for (auto* p : params) p->value.fill(0.0);
  CHECK(bit_equal(run_block(fdfe, x), x));
}

TEST_CASE("fdfe matches the composed dwt/conv/idwt oracle") {
  Rng rng(51);
  FdfeLayer<double> fdfe("fdfe", 8, 9);
  std::vector<Parameter<double>*> params;
  fdfe.collect(params);
  randomize(params, rng);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 16, 16}, -1.0, 1.0);
  SubbandSet<double> s = dwt2(x);
  SubbandSet<double> filtered{
      conv_layer_oracle(fdfe.dw_ll, s.ll), conv_layer_oracle(fdfe.adw_lh, s.lh),
      conv_layer_oracle(fdfe.adw_hl, s.hl), conv_layer_oracle(fdfe.dw_hh, s.hh)};
  Tensor<double> want = kernels::add(idwt2(filtered), x);
  CHECK(max_abs_diff(run_block(fdfe, x), want) < 1e-5);
}

TEST_CASE("mbms: zeroed projection is the identity; oracle composition agrees") {
  Rng rng(52);
  MbmsLayer<double> mbms("mbms", 8, MbmsVariant::dilated);
  std::vector<Parameter<double>*> params;
  mbms.collect(params);
  randomize(params, rng);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 12, 12}, -1.0, 1.0);

  // Composed step-by-step from independently verified pieces:
  // expand -> split 2:1:1 -> branches -> concat -> GELU -> GRN -> fuse -> project -> +x.
  Tensor<double> e = conv_layer_oracle(mbms.expand, x);
  Tensor<double> z1 = conv_layer_oracle(mbms.b1, slice_oracle(e, 0, 16));
  Tensor<double> z2 = conv_layer_oracle(mbms.b2, slice_oracle(e, 16, 24));
  Tensor<double> z3 = conv_layer_oracle(mbms.b3, slice_oracle(e, 24, 32));
  Tensor<double> cat = kernels::concat_channels<double>({z1, z2, z3});
  Tensor<double> fused = conv_layer_oracle(mbms.fuse_dw, grn_layer_oracle(mbms.grn, gelu_oracle(cat)));
  Tensor<double> want = kernels::add(conv_layer_oracle(mbms.project, fused), x);
  CHECK(max_abs_diff(run_block(mbms, x), want) < 1e-5);

  // Branch receptive fields: b2/b3 are dilated with matching padding, so the
  // spatial size is preserved.
  CHECK(run_block(mbms, x).shape() == x.shape());

  mbms.project.weight.value.fill(0.0);
  mbms.project.bias.value.fill(0.0);
  CHECK(bit_equal(run_block(mbms, x), x));
}

TEST_CASE("mbms large-kernel variant preserves shape and differs from dilated") {
  Rng rng(53);
  MbmsLayer<double> dil("m", 8, MbmsVariant::dilated);
  MbmsLayer<double> big("m", 8, MbmsVariant::large_kernel);
  CHECK(big.b2.weight.value.shape() == Shape{8, 1, 5, 5});
  CHECK(big.b3.weight.value.shape() == Shape{8, 1, 7, 7});
  CHECK(dil.b2.weight.value.shape() == Shape{8, 1, 3, 3});

  std::vector<Parameter<double>*> params;
  big.collect(params);
  randomize(params, rng);
  Tensor<double> x = rng.uniform_tensor<double>({2, 8, 10, 10}, -1.0, 1.0);
  CHECK(run_block(big, x).shape() == x.shape());
}

TEST_CASE("msfd block composes fdfe then mbms") {
  Rng rng(54);
  MsfdBlock<double> msfd("msfd", 8, 9, MbmsVariant::dilated);
  std::vector<Parameter<double>*> params;
  msfd.collect(params);
  randomize(params, rng);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 8, 8}, -1.0, 1.0);
  Tensor<double> step = run_block(msfd.fdfe, x);
  Tensor<double> want = run_block(msfd.mbms, step);
  CHECK(max_abs_diff(run_block(msfd, x), want) < 1e-12);
  CHECK(run_block(msfd, x).shape() == x.shape());

  // Double residual: zero the fdfe kernels and the mbms projection.
  for (auto* p : params) p->value.fill(0.0);
  CHECK(bit_equal(run_block(msfd, x), x));
}

TEST_CASE("cpe: zero kernel passes through, delta doubles, oracle agrees") {
  Rng rng(55);
  CpeLayer<double> cpe("cpe", 6);
  std::vector<Parameter<double>*> params;
  cpe.collect(params);

  Tensor<double> x = rng.uniform_tensor<double>({1, 6, 5, 5}, -1.0, 1.0);

  // Zero depthwise + zero-init GRN: GRN(0) = 0, output = x.
  for (auto* p : params) p->value.fill(0.0);
  CHECK(bit_equal(run_block(cpe, x), x));

  // Delta kernel with zero-init GRN: GRN is the identity, output = 2x.
  set_delta(cpe.dw.weight);
  CHECK(max_abs_diff(run_block(cpe, x), kernels::scale(x, 2.0)) < 1e-12);

  randomize(params, rng);
  Tensor<double> want = kernels::add(grn_layer_oracle(cpe.grn, conv_layer_oracle(cpe.dw, x)), x);
  CHECK(max_abs_diff(run_block(cpe, x), want) < 1e-6);
}

TEST_CASE("afg: single token, zero projection, and the vanilla-attention oracle") {
  Rng rng(56);

  // H = W = 1: softmax over one key is 1, so out = project(V') + x.
  {
    AfgLayer<double> afg("afg", 8, 2, AttentionVariant::interaction);
    std::vector<Parameter<double>*> params;
    afg.collect(params);
    randomize(params, rng);
    Tensor<double> x = rng.uniform_tensor<double>({2, 8, 1, 1}, -1.0, 1.0);

    Tensor<double> qkv = conv_layer_oracle(afg.qkv, x);
    Tensor<double> v = slice_oracle(qkv, 16, 24);
    Tensor<double> vp = conv_layer_oracle(*afg.dw_v, v);
    Tensor<double> want = kernels::add(conv_layer_oracle(afg.project, vp), x);
    CHECK(max_abs_diff(run_block(afg, x), want) < 1e-10);
  }

  // Zeroed projection: pure residual.
  {
    AfgLayer<double> afg("afg", 8, 2, AttentionVariant::interaction);
    std::vector<Parameter<double>*> params;
    afg.collect(params);
    randomize(params, rng);
    afg.project.weight.value.fill(0.0);
    afg.project.bias.value.fill(0.0);
    Tensor<double> x = rng.uniform_tensor<double>({1, 8, 4, 4}, -1.0, 1.0);
    CHECK(bit_equal(run_block(afg, x), x));
  }

  // Delta aggregation kernels equal plain multi-head attention; this is the
  // same path the traditional-attention ablation takes.
  {
    AfgLayer<double> afg("afg", 16, 2, AttentionVariant::interaction);
    std::vector<Parameter<double>*> params;
    afg.collect(params);
    randomize(params, rng);
    set_delta(afg.dw_k->weight);
    afg.dw_k->bias.value.fill(0.0);
    set_delta(afg.dw_v->weight);
    afg.dw_v->bias.value.fill(0.0);

    Tensor<double> x = rng.uniform_tensor<double>({1, 16, 6, 6}, -1.0, 1.0);
    Tensor<double> want = selftest::oracle::attention_naive(
        x, afg.qkv.weight.value, afg.qkv.bias.value, afg.project.weight.value,
        afg.project.bias.value, 2);
    CHECK(max_abs_diff(run_block(afg, x), want) < 1e-5);

    // Float width stays inside the same tolerance.
    AfgLayer<float> afgf("afgf", 16, 2, AttentionVariant::interaction);
    std::vector<Parameter<float>*> fparams;
    afgf.collect(fparams);
    for (size_t i = 0; i < fparams.size(); ++i) {
      fparams[i]->value = params[i]->value.cast<float>();
    }
    Tape<float> tf(false);
    Tensor<float> gotf = afgf(tf, tf.constant(x.cast<float>())).value();
    CHECK(max_abs_diff(gotf.cast<double>(), want) < 1e-5);
  }

  // Traditional variant carries no aggregation parameters.
  {
    AfgLayer<double> trad("trad", 16, 2, AttentionVariant::traditional);
    std::vector<Parameter<double>*> params;
    trad.collect(params);
    CHECK(params.size() == 4);  // qkv w/b + project w/b only
    CHECK_FALSE(trad.dw_k.has_value());
  }

  CHECK_THROWS_AS(AfgLayer<double>("bad", 10, 4, AttentionVariant::interaction), ConfigError);
}

TEST_CASE("cmsfe: residual identities, cascade order dependence, oracle") {
  Rng rng(57);
  CmsfeLayer<double> cmsfe("cmsfe", 8);
  std::vector<Parameter<double>*> params;
  cmsfe.collect(params);
  randomize(params, rng);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 7, 7}, -1.0, 1.0);

  // Composed oracle: expand -> equal split -> chained depthwise -> concat ->
  // GELU -> GRN -> fuse -> project -> +x.
  Tensor<double> e = conv_layer_oracle(cmsfe.expand, x);
  std::vector<Tensor<double>> zs;
  Tensor<double> prev;
  for (int i = 0; i < 4; ++i) {
    Tensor<double> zi = slice_oracle(e, i * 8, (i + 1) * 8);
    if (i > 0) zi = kernels::add(zi, prev);
    prev = conv_layer_oracle(cmsfe.cascade[i], zi);
    zs.push_back(prev);
  }
  Tensor<double> cat = kernels::concat_channels(zs);
  Tensor<double> fused =
      conv_layer_oracle(cmsfe.fuse_dw, grn_layer_oracle(cmsfe.grn, gelu_oracle(cat)));
  Tensor<double> want = kernels::add(conv_layer_oracle(cmsfe.project, fused), x);
  CHECK(max_abs_diff(run_block(cmsfe, x), want) < 1e-5);

  // The cascade is order dependent: swapping the z2/z3 slots of the expand
  // weights changes the output (non-commutativity witness).
  {
    Tensor<double> base = run_block(cmsfe, x);
    Tensor<double> w = cmsfe.expand.weight.value.clone();
    double* pw = w.mut();
    const int64_t span = 8 * 8;  // one split group of the expand output
    for (int64_t i = 0; i < span; ++i) std::swap(pw[span + i], pw[2 * span + i]);
    Tensor<double> saved = cmsfe.expand.weight.value;
    cmsfe.expand.weight.value = w;
    CHECK(max_abs_diff(run_block(cmsfe, x), base) > 1e-6);
    cmsfe.expand.weight.value = saved;
  }

  // Zero projection: residual only.
  cmsfe.project.weight.value.fill(0.0);
  cmsfe.project.bias.value.fill(0.0);
  CHECK(bit_equal(run_block(cmsfe, x), x));

  // Zero cascade kernels and fuse bias: z'_i = 0, chain collapses, output = x
  // once the projection is zero too.
  randomize(params, rng);
  for (auto& layer : cmsfe.cascade) {
    layer.weight.value.fill(0.0);
    layer.bias.value.fill(0.0);
  }
  cmsfe.fuse_dw.bias.value.fill(0.0);
  cmsfe.project.weight.value.fill(0.0);
  cmsfe.project.bias.value.fill(0.0);
  CHECK(bit_equal(run_block(cmsfe, x), x));
}

TEST_CASE("msia block composes cpe, afg, cmsfe; zeroed layers are identity") {
  Rng rng(58);
  MsiaBlock<double> msia("msia", 8, 2, AttentionVariant::interaction);
  std::vector<Parameter<double>*> params;
  msia.collect(params);
  randomize(params, rng);

  Tensor<double> x = rng.uniform_tensor<double>({1, 8, 6, 6}, -1.0, 1.0);
  Tensor<double> want = run_block(msia.cmsfe, run_block(msia.afg, run_block(msia.cpe, x)));
  CHECK(max_abs_diff(run_block(msia, x), want) < 1e-12);
  CHECK(run_block(msia, x).shape() == x.shape());

  // Triple residual.
  msia.cpe.dw.weight.value.fill(0.0);
  msia.cpe.dw.bias.value.fill(0.0);
  msia.cpe.grn.gamma.value.fill(0.0);
  msia.cpe.grn.beta.value.fill(0.0);
  msia.afg.project.weight.value.fill(0.0);
  msia.afg.project.bias.value.fill(0.0);
  msia.cmsfe.project.weight.value.fill(0.0);
  msia.cmsfe.project.bias.value.fill(0.0);
  CHECK(bit_equal(run_block(msia, x), x));
}

TEST_CASE("blocks preserve shape on representative sizes") {
  Rng rng(59);
  MsfdBlock<float> msfd("s", 40, 9, MbmsVariant::dilated);
  std::vector<Parameter<float>*> p1;
  msfd.collect(p1);
  for (auto* p : p1) {
    float* v = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) v[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
  }
  Tensor<float> x = rng.uniform_tensor<float>({2, 40, 28, 28}, -1.0, 1.0);
  Tape<float> t(false);
  CHECK(msfd(t, t.constant(x)).shape() == Shape{2, 40, 28, 28});

  MsiaBlock<float> msia("d", 64, 2, AttentionVariant::interaction);
  std::vector<Parameter<float>*> p2;
  msia.collect(p2);
  for (auto* p : p2) {
    float* v = p->value.mut();
    for (int64_t i = 0; i < p->value.numel(); ++i) v[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
  }
  Tensor<float> y = rng.uniform_tensor<float>({2, 64, 7, 7}, -1.0, 1.0);
  Tape<float> t2(false);
  CHECK(msia(t2, t2.constant(y)).shape() == Shape{2, 64, 7, 7});
}

TEST_CASE("attention selftest suite is green") {
  selftest::SelftestOptions opts;
  selftest::SuiteResult res = selftest::attention_suite(opts);
  for (const auto& f : res.failures) MESSAGE(f);
  CHECK(res.passed);
}
