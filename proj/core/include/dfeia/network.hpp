#pragma once

#include <array>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dfeia/blocks.hpp"

namespace dfeia {

enum class BlockKind { msfd, msia };

// Full architecture description: a two-conv stride-4 stem, four stages of
// blocks with stride-2 conv downsamplers between them, global average pool
// and a linear classifier head. Attention head width is fixed at 32 channels
// (heads = C/32) for MSIA stages.
struct NetworkConfig {
  std::array<int, 4> stage_depths{2, 3, 5, 2};
  std::array<int64_t, 4> stage_channels{48, 80, 160, 288};
  int64_t num_classes = 8;
  int adw_kernel = 9;  // 7, 9 or 11
  MbmsVariant mbms_variant = MbmsVariant::dilated;
  AttentionVariant attention_variant = AttentionVariant::interaction;
  std::array<BlockKind, 4> block_plan{BlockKind::msfd, BlockKind::msfd,
                                      BlockKind::msia, BlockKind::msia};
  int64_t input_size = 224;

  static constexpr int64_t kHeadDim = 32;

  // Spatial extent entering each stage (stem has overall stride 4, each
  // downsampler stride 2).
  std::array<int64_t, 4> stage_resolutions() const {
    std::array<int64_t, 4> r{};
    int64_t s = input_size / 4;
    for (int i = 0; i < 4; ++i) {
      r[i] = s;
      s /= 2;
    }
    return r;
  }

  int64_t heads_for_stage(int i) const { return stage_channels[i] / kHeadDim; }

  void validate() const {
    if (num_classes < 2) throw ConfigError("config: num_classes must be >= 2");
    if (adw_kernel != 7 && adw_kernel != 9 && adw_kernel != 11) {
      throw ConfigError("config: adw_kernel must be 7, 9 or 11, got " + std::to_string(adw_kernel));
    }
    if (input_size < 32 || input_size % 32 != 0) {
      throw ConfigError("config: input_size must be a positive multiple of 32, got " +
                        std::to_string(input_size));
    }
    for (int i = 0; i < 4; ++i) {
      if (stage_depths[i] < 1) {
        throw ConfigError("config: stage_depths[" + std::to_string(i) + "] must be >= 1");
      }
      if (stage_channels[i] < 1) {
        throw ConfigError("config: stage_channels[" + std::to_string(i) + "] must be positive");
      }
    }
    if (stage_channels[0] % 2 != 0) {
      throw ConfigError("config: stage_channels[0] must be even (stem widens from C1/2 to C1)");
    }
    const auto res = stage_resolutions();
    for (int i = 0; i < 4; ++i) {
      if (block_plan[i] == BlockKind::msia && stage_channels[i] % kHeadDim != 0) {
        throw ConfigError("config: stage_channels[" + std::to_string(i) + "]=" +
                          std::to_string(stage_channels[i]) +
                          " must be divisible by 32 for an MSIA stage (head width)");
      }
      if (block_plan[i] == BlockKind::msfd && res[i] % 2 != 0) {
        throw ConfigError("config: stage " + std::to_string(i + 1) + " resolution " +
                          std::to_string(res[i]) + " must be even for an MSFD stage");
      }
      if (res[i] < 1) {
        throw ConfigError("config: input_size " + std::to_string(input_size) +
                          " leaves no resolution for stage " + std::to_string(i + 1));
      }
    }
  }
};

// Per-forward activation shape trace, for shape assertions and debugging.
struct StageTrace {
  Shape after_stem;
  std::array<Shape, 4> after_stage;
};

template <typename T>
struct Stage {
  BlockKind kind = BlockKind::msfd;
  std::vector<MsfdBlock<T>> msfd;
  std::vector<MsiaBlock<T>> msia;

  Var<T> operator()(Tape<T>& t, Var<T> x) const {
    if (kind == BlockKind::msfd) {
      for (const auto& b : msfd) x = b(t, x);
    } else {
      for (const auto& b : msia) x = b(t, x);
    }
    return x;
  }

  void init(Rng& rng) {
    for (auto& b : msfd) b.init(rng);
    for (auto& b : msia) b.init(rng);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto& b : msfd) b.collect(out);
    for (auto& b : msia) b.collect(out);
  }
};

template <typename T>
class Model {
 public:
  explicit Model(NetworkConfig cfg) : config(std::move(cfg)), layers_(build_layers(config)) {}

  NetworkConfig config;

  // Parameters in a fixed traversal order: stem, then stage blocks with the
  // trailing downsampler after each of stages 1..3, then the head. This
  // order defines both the init draw order and the weight-file layout.
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    layers_->stem1.collect(out);
    layers_->stem2.collect(out);
    for (int i = 0; i < 4; ++i) {
      layers_->stages[i].collect(out);
      if (i < 3) layers_->down[i].collect(out);
    }
    layers_->head.collect(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  Var<T> forward(Tape<T>& t, const Var<T>& x, StageTrace* trace = nullptr) const {
    const Shape& s = x.shape();
    if (s.size() != 4 || s[1] != 3 || s[2] != config.input_size || s[3] != config.input_size) {
      throw UsageError("forward: expected input [N,3," + std::to_string(config.input_size) + "," +
                       std::to_string(config.input_size) + "], got " + shape_str(s));
    }
    Var<T> h = layers_->stem2(t, ops::gelu(t, layers_->stem1(t, x)));
    if (trace) trace->after_stem = h.shape();
    for (int i = 0; i < 4; ++i) {
      h = layers_->stages[i](t, h);
      if (trace) trace->after_stage[i] = h.shape();
      if (i < 3) h = layers_->down[i](t, h);
    }
    return layers_->head(t, ops::global_avg_pool(t, h));
  }

  // Inference convenience without tape bookkeeping.
  Tensor<T> forward(const Tensor<T>& x, StageTrace* trace = nullptr) const {
    Tape<T> t(false);
    return forward(t, t.constant(x), trace).value();
  }

  void init_weights(uint64_t seed) {
    Rng rng(seed);
    layers_->stem1.init(rng);
    layers_->stem2.init(rng);
    for (int i = 0; i < 4; ++i) {
      layers_->stages[i].init(rng);
      if (i < 3) layers_->down[i].init(rng);
    }
    layers_->head.init(rng);
  }

 private:
  struct Layers {
    ConvLayer<T> stem1, stem2;
    std::array<Stage<T>, 4> stages;
    std::vector<ConvLayer<T>> down;
    LinearLayer<T> head;

    Layers(ConvLayer<T> s1, ConvLayer<T> s2, std::array<Stage<T>, 4> st,
           std::vector<ConvLayer<T>> d, LinearLayer<T> h)
        : stem1(std::move(s1)), stem2(std::move(s2)), stages(std::move(st)),
          down(std::move(d)), head(std::move(h)) {}
  };

  static std::unique_ptr<Layers> build_layers(const NetworkConfig& cfg) {
    cfg.validate();
    kernels::Conv2dGeom stride2;
    stride2.stride_h = stride2.stride_w = 2;
    stride2.pad_h = stride2.pad_w = 1;

    const int64_t c1 = cfg.stage_channels[0];
    ConvLayer<T> stem1("stem.conv1", c1 / 2, 3, 3, 3, stride2);
    ConvLayer<T> stem2("stem.conv2", c1, c1 / 2, 3, 3, stride2);

    std::array<Stage<T>, 4> stages;
    for (int i = 0; i < 4; ++i) {
      const std::string sp = "stage" + std::to_string(i + 1);
      const int64_t c = cfg.stage_channels[i];
      stages[i].kind = cfg.block_plan[i];
      for (int bi = 0; bi < cfg.stage_depths[i]; ++bi) {
        const std::string bp = sp + ".block" + std::to_string(bi);
        if (cfg.block_plan[i] == BlockKind::msfd) {
          stages[i].msfd.emplace_back(bp, c, cfg.adw_kernel, cfg.mbms_variant);
        } else {
          stages[i].msia.emplace_back(bp, c, cfg.heads_for_stage(i), cfg.attention_variant);
        }
      }
    }

    std::vector<ConvLayer<T>> down;
    for (int i = 0; i < 3; ++i) {
      down.push_back(ConvLayer<T>("down" + std::to_string(i + 1), cfg.stage_channels[i + 1],
                                  cfg.stage_channels[i], 3, 3, stride2));
    }

    LinearLayer<T> head("head", cfg.num_classes, cfg.stage_channels[3]);

    auto layers = std::make_unique<Layers>(std::move(stem1), std::move(stem2), std::move(stages),
                                           std::move(down), std::move(head));
    return layers;
  }

  std::unique_ptr<Layers> layers_;
};

// Deterministic construction + initialization; identical seeds give
// bit-identical models. Parameter names are checked unique.
template <typename T>
Model<T> build(const NetworkConfig& cfg, uint64_t seed) {
  Model<T> m(cfg);
  m.init_weights(seed);
  std::set<std::string> names;
  for (auto* p : m.parameters()) {
    if (!names.insert(p->name).second) {
      throw ConfigError("build: duplicate parameter name " + p->name);
    }
  }
  return m;
}

template <typename T>
int64_t count_params(Model<T>& m) {
  int64_t n = 0;
  for (auto* p : m.parameters()) n += p->value.numel();
  return n;
}

}  // namespace dfeia
