#pragma once

#include <string>
#include <vector>

#include "dfeia/network.hpp"

// Analytic multiply-accumulate accounting. Convention: 1 MAC = 1 reported
// FLOP-unit; convolutions count N*H'*W'*Cout*(Cin/groups)*kh*kw, attention
// counts N*heads*(HW)^2*d for the query-key product and again for the value
// product; elementwise ops, normalizations, pooling and the wavelet
// transforms are excluded, matching the usual vision-model convention.
namespace dfeia {

struct CountRow {
  std::string name;
  int64_t params = 0;
  int64_t macs = 0;
};

struct CountReport {
  int64_t params = 0;
  int64_t macs = 0;
  std::vector<CountRow> per_stage;
};

namespace counting_detail {

inline int64_t conv_macs(int64_t oh, int64_t ow, int64_t cout, int64_t cin_per_group,
                         int64_t kh, int64_t kw) {
  return oh * ow * cout * cin_per_group * kh * kw;
}

inline int64_t msfd_block_macs(int64_t c, int64_t r, int adw_k, MbmsVariant variant) {
  const int64_t half = r / 2;
  int64_t m = 0;
  m += conv_macs(half, half, c, 1, 3, 3) * 2;              // dw_ll, dw_hh
  m += conv_macs(half, half, c, 1, 1, adw_k) * 2;          // adw_lh, adw_hl
  m += conv_macs(r, r, 4 * c, c, 1, 1);                    // expand
  m += conv_macs(r, r, 2 * c, 1, 3, 3);                    // b1
  if (variant == MbmsVariant::dilated) {
    m += conv_macs(r, r, c, 1, 3, 3) * 2;                  // b2, b3
  } else {
    m += conv_macs(r, r, c, 1, 5, 5) + conv_macs(r, r, c, 1, 7, 7);
  }
  m += conv_macs(r, r, 4 * c, 1, 3, 3);                    // fuse_dw
  m += conv_macs(r, r, c, 4 * c, 1, 1);                    // project
  return m;
}

inline int64_t msia_block_macs(int64_t c, int64_t r, AttentionVariant variant) {
  int64_t m = 0;
  m += conv_macs(r, r, c, 1, 3, 3);                        // cpe dw
  m += conv_macs(r, r, 3 * c, c, 1, 1);                    // qkv
  if (variant == AttentionVariant::interaction) {
    m += conv_macs(r, r, c, 1, 3, 3) * 2;                  // dw_k, dw_v
  }
  const int64_t hw = r * r;
  m += 2 * hw * hw * c;                                    // QK'^T and attn*V'
  m += conv_macs(r, r, c, c, 1, 1);                        // project
  m += conv_macs(r, r, 4 * c, c, 1, 1);                    // cmsfe expand
  m += conv_macs(r, r, c, 1, 3, 3) * 4;                    // cascade
  m += conv_macs(r, r, 4 * c, 1, 3, 3);                    // fuse_dw
  m += conv_macs(r, r, c, 4 * c, 1, 1);                    // cmsfe project
  return m;
}

}  // namespace counting_detail

// Per-sample MAC count for a forward pass at the given input size.
inline int64_t count_macs(const NetworkConfig& cfg, int64_t input_size) {
  using namespace counting_detail;
  NetworkConfig c = cfg;
  c.input_size = input_size;
  c.validate();

  const int64_t c1 = c.stage_channels[0];
  int64_t total = 0;
  total += conv_macs(input_size / 2, input_size / 2, c1 / 2, 3, 3, 3);
  total += conv_macs(input_size / 4, input_size / 4, c1, c1 / 2, 3, 3);

  const auto res = c.stage_resolutions();
  for (int i = 0; i < 4; ++i) {
    const int64_t blocks = c.stage_depths[i];
    const int64_t ch = c.stage_channels[i];
    const int64_t m =
        c.block_plan[i] == BlockKind::msfd
            ? msfd_block_macs(ch, res[i], c.adw_kernel, c.mbms_variant)
            : msia_block_macs(ch, res[i], c.attention_variant);
    total += blocks * m;
    if (i < 3) total += conv_macs(res[i + 1], res[i + 1], c.stage_channels[i + 1], ch, 3, 3);
  }
  total += c.stage_channels[3] * c.num_classes;  // head
  return total;
}

// Params come from the model's registry, MACs from the analytic walk; both
// grouped into stem / stageN / downN / head rows.
template <typename T>
CountReport count_report(Model<T>& m, int64_t input_size) {
  using namespace counting_detail;
  const NetworkConfig& cfg = m.config;
  const auto res = [&] {
    NetworkConfig c = cfg;
    c.input_size = input_size;
    c.validate();
    return c.stage_resolutions();
  }();

  CountReport rep;
  auto row = [&](const std::string& name) -> CountRow& {
    for (auto& r : rep.per_stage) {
      if (r.name == name) return r;
    }
    rep.per_stage.push_back(CountRow{name, 0, 0});
    return rep.per_stage.back();
  };

  for (auto* p : m.parameters()) {
    const std::string group = p->name.substr(0, p->name.find('.'));
    row(group).params += p->value.numel();
    rep.params += p->value.numel();
  }

  row("stem").macs = conv_macs(input_size / 2, input_size / 2, cfg.stage_channels[0] / 2, 3, 3, 3) +
                     conv_macs(input_size / 4, input_size / 4, cfg.stage_channels[0],
                               cfg.stage_channels[0] / 2, 3, 3);
  for (int i = 0; i < 4; ++i) {
    const int64_t ch = cfg.stage_channels[i];
    const int64_t m = cfg.block_plan[i] == BlockKind::msfd
                          ? msfd_block_macs(ch, res[i], cfg.adw_kernel, cfg.mbms_variant)
                          : msia_block_macs(ch, res[i], cfg.attention_variant);
    row("stage" + std::to_string(i + 1)).macs = cfg.stage_depths[i] * m;
    if (i < 3) {
      row("down" + std::to_string(i + 1)).macs =
          conv_macs(res[i + 1], res[i + 1], cfg.stage_channels[i + 1], ch, 3, 3);
    }
  }
  row("head").macs = cfg.stage_channels[3] * cfg.num_classes;

  for (const auto& r : rep.per_stage) rep.macs += r.macs;
  return rep;
}

}  // namespace dfeia
