/* Copyright 2026 The TriLiteNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "tln/model.hpp"

#include <sstream>

namespace tln {

// ------------------------------------------------------------------ config

ModelConfig ModelConfig::named(const std::string& name) {
  ModelConfig c;
  c.name = name;
  if (name == "tiny") {
    c.c = {8, 32, 64, 64, 64}, c.p = 32, c.f = 16, c.u1 = 8, c.u2 = 4, c.repeats_p = 1, c.repeats_q = 1;
  } else if (name == "small") {
    c.c = {16, 64, 128, 128, 128}, c.p = 64, c.f = 32, c.u1 = 16, c.u2 = 8, c.repeats_p = 2, c.repeats_q = 3;
  } else if (name == "base") {
    c.c = {32, 128, 256, 256, 256}, c.p = 128, c.f = 64, c.u1 = 32, c.u2 = 16, c.repeats_p = 3, c.repeats_q = 5;
  } else {
    throw ParameterError("unknown model config '" + name + "' (expected tiny, small or base)");
  }
  return c;
}

void ModelConfig::validate() const {
  for (int64_t v : c)
    if (v < 1) throw ParameterError("model config: channel widths must be positive");
  if (p < 1 || f < 1 || u1 < 1 || u2 < 1) throw ParameterError("model config: channel widths must be positive");
  if (c[1] % 2 != 0 || c[2] % 2 != 0) throw ParameterError("model config: C2 and C3 must be even");
  if (c[1] / 2 < 5 || c[2] / 2 < 5) throw ParameterError("model config: C2/2 and C3/2 must cover five ESP branches");
  if (repeats_p < 0 || repeats_q < 0) throw ParameterError("model config: repeats must be non-negative");
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0)
    throw ParameterError("model config: input height and width must be positive multiples of 32");
  if (patch < 1 || (height / 8) % patch != 0 || (width / 8) % patch != 0)
    throw ParameterError("model config: attention patch must divide the 1/8-resolution feature map");
}

std::string ModelConfig::descriptor() const {
  std::ostringstream o;
  o << "name=" << name << " c=" << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[3] << ',' << c[4] << " p=" << p
    << " f=" << f << " u=" << u1 << ',' << u2 << " r=" << repeats_p << ',' << repeats_q << " size=" << height << 'x'
    << width << " patch=" << patch << " pcaa=" << features.use_pcaa << " litepan=" << features.use_litepan
    << " spp=" << features.use_spp;
  return o.str();
}

ModelConfig ModelConfig::from_descriptor(const std::string& text) {
  ModelConfig m;
  std::istringstream in(text);
  std::string tok;
  auto ints = [](const std::string& v, char sep) {
    std::vector<int64_t> out;
    std::istringstream s(v);
    std::string part;
    while (std::getline(s, part, sep)) out.push_back(std::stoll(part));
    return out;
  };
  int seen = 0;
  try {
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ParameterError("bad token");
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      ++seen;
      if (k == "name") {
        m.name = v;
      } else if (k == "c") {
        auto x = ints(v, ',');
        if (x.size() != 5) throw ParameterError("bad c");
        for (size_t i = 0; i < 5; ++i) m.c[i] = x[i];
      } else if (k == "p") {
        m.p = std::stoll(v);
      } else if (k == "f") {
        m.f = std::stoll(v);
      } else if (k == "u") {
        auto x = ints(v, ',');
        if (x.size() != 2) throw ParameterError("bad u");
        m.u1 = x[0], m.u2 = x[1];
      } else if (k == "r") {
        auto x = ints(v, ',');
        if (x.size() != 2) throw ParameterError("bad r");
        m.repeats_p = x[0], m.repeats_q = x[1];
      } else if (k == "size") {
        auto x = ints(v, 'x');
        if (x.size() != 2) throw ParameterError("bad size");
        m.height = x[0], m.width = x[1];
      } else if (k == "patch") {
        m.patch = std::stoll(v);
      } else if (k == "pcaa") {
        m.features.use_pcaa = v == "1";
      } else if (k == "litepan") {
        m.features.use_litepan = v == "1";
      } else if (k == "spp") {
        m.features.use_spp = v == "1";
      } else {
        throw ParameterError("unknown key " + k);
      }
    }
  } catch (const std::logic_error& e) {
    throw ParameterError("malformed model descriptor '" + text + "': " + e.what());
  }
  if (seen != 11) throw ParameterError("incomplete model descriptor '" + text + "'");
  m.validate();
  return m;
}

// ------------------------------------------------------------------- build

Model build(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  Builder b(m.params, m.buffers, seed);
  const auto [c1, c2, c3, c4, c5] = cfg.c;

  m.level1 = ConvBNAct(b, "encoder.level1", 3, c1, 3, 2, 1);
  m.merge1 = ConvBNAct(b, "encoder.merge1", c1 + 3, c1 + 3, 3, 1, 2);

  BlockSpec down2;
  down2.kind = BlockKind::kStrideEsp, down2.stride = 2, down2.in_channels = c1 + 3, down2.out_channels = c2 / 2;
  m.stage2_down = EspBlock(b, "encoder.stage2.down", down2, 2);
  BlockSpec esp2;
  esp2.in_channels = esp2.out_channels = c2 / 2, esp2.repeats = cfg.repeats_p;
  for (int64_t i = 0; i < cfg.repeats_p; ++i)
    m.stage2.emplace_back(b, "encoder.stage2.esp" + std::to_string(i + 1), esp2, 4);
  m.merge2 = ConvBNAct(b, "encoder.merge2", c2, c2, 1, 1, 4);
  m.merge2_image = ConvBNAct(b, "encoder.merge2_image", c2 + 3, c2 + 3, 3, 1, 4);

  BlockSpec down3 = down2;
  down3.in_channels = c2 + 3, down3.out_channels = c3 / 2;
  m.stage3_down = EspBlock(b, "encoder.stage3.down", down3, 4);
  BlockSpec esp3;
  esp3.in_channels = esp3.out_channels = c3 / 2, esp3.repeats = cfg.repeats_q;
  for (int64_t i = 0; i < cfg.repeats_q; ++i)
    m.stage3.emplace_back(b, "encoder.stage3.esp" + std::to_string(i + 1), esp3, 8);
  m.merge3 = ConvBNAct(b, "encoder.merge3", c3, c3, 1, 1, 8);
  m.level4 = ConvBNAct(b, "encoder.level4", c3, c4, 3, 2, 8);
  m.level5 = ConvBNAct(b, "encoder.level5", c4, c5, 3, 2, 16);

  if (cfg.features.use_spp) m.spp = Spp(b, "spp", c5, 32);
  if (cfg.features.use_litepan) {
    m.neck = LitePan(b, "neck", c3, c4, c5, cfg.p);
  } else {
    m.lateral_only = {ConvBNAct(b, "neck.lateral3", c3, cfg.p, 1, 1, 8),
                      ConvBNAct(b, "neck.lateral4", c4, cfg.p, 1, 1, 16),
                      ConvBNAct(b, "neck.lateral5", c5, cfg.p, 1, 1, 32)};
  }
  m.det_head = DetHead(b, "det_head", cfg.p);
  if (cfg.features.use_pcaa)
    m.pcaa = Pcaa(b, "pcaa", c3, cfg.f, cfg.patch, 8);
  else
    m.pcaa_off = ConvBNAct(b, "pcaa.project", c3, cfg.f, 1, 1, 8);
  m.seg_da = SegHead(b, "seg_da", cfg.f, cfg.u1, cfg.u2);
  m.seg_ll = SegHead(b, "seg_ll", cfg.f, cfg.u1, cfg.u2);

  m.layers = b.layers();
  m.norm_channels = b.norm_channels();
  m.slope_channels = b.slope_channels();
  return m;
}

// ----------------------------------------------------------------- forward

ModelOutput forward(const Model& m, Ctx& ctx, const Var<float>& image) {
  const ModelConfig& cfg = m.config;
  if (!image || image.value().rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg.height ||
      image.dim(3) != cfg.width)
    throw ParameterError("forward: expected image (N,3," + std::to_string(cfg.height) + "," +
                         std::to_string(cfg.width) + "), got " + (image ? image.shape().str() : "none"));
  const Var<float> i1 = ctx.tag("I1", pool2d(image, PoolMode::kAvg, {2, 2}, {2, 2}, {0, 0}));
  const Var<float> i2 = ctx.tag("I2", pool2d(i1, PoolMode::kAvg, {2, 2}, {2, 2}, {0, 0}));

  const Var<float> c1 = ctx.tag("C1", m.level1(ctx, image));
  const Var<float> x1 = m.merge1(ctx, concat_channels<float>({c1, i1}));

  const Var<float> d2 = m.stage2_down(ctx, x1);
  Var<float> chain = d2;
  for (const auto& blk : m.stage2) chain = blk(ctx, chain);
  const Var<float> c2 = ctx.tag("C2", m.merge2(ctx, concat_channels<float>({chain, d2})));
  const Var<float> x2 = m.merge2_image(ctx, concat_channels<float>({c2, i2}));

  const Var<float> d3 = m.stage3_down(ctx, x2);
  chain = d3;
  for (const auto& blk : m.stage3) chain = blk(ctx, chain);
  const Var<float> c3 = ctx.tag("C3", m.merge3(ctx, concat_channels<float>({chain, d3})));
  const Var<float> c4 = ctx.tag("C4", m.level4(ctx, c3));
  const Var<float> c5 = ctx.tag("C5", m.level5(ctx, c4));

  ModelOutput out;
  const Var<float> top = cfg.features.use_spp ? ctx.tag("SPP", m.spp(ctx, c5)) : c5;
  std::array<Var<float>, 3> p;
  if (cfg.features.use_litepan) {
    p = m.neck(ctx, c3, c4, top);
  } else {
    p = {m.lateral_only[0](ctx, c3), m.lateral_only[1](ctx, c4), m.lateral_only[2](ctx, top)};
  }
  ctx.tag("P3", p[0]);
  ctx.tag("P4", p[1]);
  ctx.tag("P5", p[2]);
  out.det = m.det_head(ctx, p);
  for (size_t i = 0; i < 3; ++i) ctx.tag("det" + std::to_string(i + 3), out.det[i]);

  const Var<float> f = ctx.tag("F_pcaa", cfg.features.use_pcaa ? m.pcaa(ctx, c3) : m.pcaa_off(ctx, c3));
  out.da = m.seg_da(ctx, f, i1, i2);
  out.ll = m.seg_ll(ctx, f, i1, i2);
  return out;
}

ModelOutput infer(const Model& m, const Tensor<float>& image) {
  Ctx ctx(m.params, m.buffers);
  return forward(m, ctx, constant(image));
}

// -------------------------------------------------------------- accounting

int64_t count_params(const Model& m) { return m.params.numel(); }

int64_t analytic_param_count(const Model& m) {
  int64_t n = 2 * m.norm_channels + m.slope_channels;
  for (const auto& l : m.layers) n += l.param_count();
  return n;
}

int64_t count_flops(const Model& m, int64_t h, int64_t w) {
  int64_t n = 0;
  for (const auto& l : m.layers) n += l.macs(h, w);
  return n;
}

std::vector<std::pair<std::string, int64_t>> flops_by_module(const Model& m, int64_t h, int64_t w) {
  std::vector<std::pair<std::string, int64_t>> out;
  for (const auto& l : m.layers) {
    const std::string top = l.name.substr(0, l.name.find('.'));
    if (out.empty() || out.back().first != top) out.emplace_back(top, 0);
    out.back().second += l.macs(h, w);
  }
  return out;
}

uint64_t measured_flops(const Model& m, int64_t h, int64_t w) {
  if (h != m.config.height || w != m.config.width) {
    ModelConfig cfg = m.config;
    cfg.height = h, cfg.width = w;
    Model resized = m;
    resized.config = cfg;
    return measured_flops(resized, h, w);
  }
  uint64_t macs = 0;
  {
    MacCounterScope scope(&macs);
    infer(m, Tensor<float>(Shape{1, 3, h, w}, 0.5f));
  }
  return macs;
}

std::vector<std::pair<std::string, Shape>> shape_table(const Model& m, int64_t batch) {
  std::vector<std::pair<std::string, Shape>> trace;
  Ctx ctx(m.params, m.buffers);
  ctx.trace = &trace;
  forward(m, ctx, constant(Tensor<float>(Shape{batch, 3, m.config.height, m.config.width}, 0.5f)));
  return trace;
}

}  // namespace tln
