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

#include "tln/blocks.hpp"

#include <cmath>

namespace tln {

int64_t ConvLayer::macs(int64_t h, int64_t w) const {
  const int64_t ih = h / in_scale, iw = w / in_scale;
  if (transposed) return ih * iw * cin * cout * k * k;
  const int64_t oh = conv_out_extent(ih, k, stride, pad, dilation);
  const int64_t ow = conv_out_extent(iw, k, stride, pad, dilation);
  return oh * ow * cout * (cin / groups) * k * k;
}

Builder::Builder(ParamStore& params, ParamStore& buffers, uint64_t seed)
    : params_(params), buffers_(buffers), rng_(seed) {}

void Builder::conv(const ConvLayer& l) {
  if (l.cin < 1 || l.cout < 1 || l.k < 1 || l.stride < 1 || l.dilation < 1 || l.groups < 1 || l.in_scale < 1)
    throw ParameterError("layer " + l.name + ": sizes must be positive");
  if (l.cin % l.groups != 0 || l.cout % l.groups != 0)
    throw ParameterError("layer " + l.name + ": channels not divisible by groups");
  if (l.transposed && l.groups != 1) throw ParameterError("layer " + l.name + ": grouped transposed conv");

  Shape shape = l.transposed ? Shape{l.cin, l.cout, l.k, l.k} : Shape{l.cout, l.cin / l.groups, l.k, l.k};
  const double fan_in = l.transposed ? std::max<double>(1.0, double(l.cin * l.k * l.k) / double(l.stride * l.stride))
                                     : double(l.cin / l.groups * l.k * l.k);
  const float bound = static_cast<float>(std::sqrt(6.0 / fan_in));
  Tensor<float> w(shape);
  std::uniform_real_distribution<float> u(-bound, bound);
  for (auto& v : w.vec()) v = u(rng_);
  params_.add(l.name + ".weight", std::move(w), ParamKind::kWeight);
  if (l.bias) params_.add(l.name + ".bias", Tensor<float>(Shape{l.cout}), ParamKind::kBias);
  layers_.push_back(l);
}

void Builder::norm(const std::string& prefix, int64_t channels) {
  params_.add(prefix + ".weight", Tensor<float>(Shape{channels}, 1.0f), ParamKind::kNormScale);
  params_.add(prefix + ".bias", Tensor<float>(Shape{channels}), ParamKind::kNormShift);
  buffers_.add(prefix + ".running_mean", Tensor<float>(Shape{channels}), ParamKind::kBuffer);
  buffers_.add(prefix + ".running_var", Tensor<float>(Shape{channels}, 1.0f), ParamKind::kBuffer);
  norm_channels_ += channels;
}

void Builder::slope(const std::string& prefix, int64_t channels) {
  params_.add(prefix + ".slope", Tensor<float>(Shape{channels}, 0.25f), ParamKind::kSlope);
  slope_channels_ += channels;
}

// ------------------------------------------------------------------ units

Conv::Conv(Builder& b, ConvLayer l) : layer(std::move(l)) { b.conv(layer); }

Var<float> Conv::operator()(Ctx& ctx, const Var<float>& x) const {
  const Var<float> w = ctx.param(layer.name + ".weight");
  const Var<float> bias = layer.bias ? ctx.param(layer.name + ".bias") : Var<float>();
  if (layer.transposed)
    return conv_transpose2d(x, w, bias, {layer.stride, layer.stride}, {layer.pad, layer.pad});
  ConvArgs a;
  a.stride = {layer.stride, layer.stride};
  a.padding = {layer.pad, layer.pad};
  a.dilation = {layer.dilation, layer.dilation};
  a.groups = layer.groups;
  return conv2d(x, w, bias, a);
}

NormAct::NormAct(Builder& b, std::string n, int64_t channels) : name(std::move(n)) {
  b.norm(name + ".bn", channels);
  b.slope(name + ".act", channels);
}

Var<float> NormAct::operator()(Ctx& ctx, const Var<float>& x) const {
  Var<float> y = batchnorm(x, ctx.param(name + ".bn.weight"), ctx.param(name + ".bn.bias"),
                           ctx.norm_state(name + ".bn"), ctx.training());
  return prelu(y, ctx.param(name + ".act.slope"));
}

ConvBNAct::ConvBNAct(Builder& b, const std::string& n, int64_t cin, int64_t cout, int64_t k, int64_t stride,
                     int64_t in_scale, int64_t groups, int64_t dilation)
    : name(n) {
  ConvLayer l;
  l.name = n + ".conv";
  l.cin = cin, l.cout = cout, l.k = k, l.stride = stride, l.dilation = dilation, l.groups = groups;
  l.pad = dilation * (k - 1) / 2;
  l.in_scale = in_scale;
  conv = Conv(b, l);
  act = NormAct(b, n, cout);
}

Var<float> ConvBNAct::operator()(Ctx& ctx, const Var<float>& x) const { return ctx.site(name, act(ctx, conv(ctx, x))); }

DsConv::DsConv(Builder& b, const std::string& n, int64_t channels, int64_t stride, int64_t in_scale)
    : dw(b, n + ".dw", channels, channels, 3, stride, in_scale, channels),
      pw(b, n + ".pw", channels, channels, 1, 1, in_scale * stride) {}

Var<float> DsConv::operator()(Ctx& ctx, const Var<float>& x) const { return pw(ctx, dw(ctx, x)); }

// -------------------------------------------------------------------- ESP

void BlockSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ParameterError("block spec: channels must be positive");
  if (branch_count < 1 || static_cast<int64_t>(dilation_rates.size()) != branch_count)
    throw ParameterError("block spec: need one dilation rate per branch");
  if (dilation_rates.front() != 1) throw ParameterError("block spec: first dilation rate must be 1");
  for (size_t i = 1; i < dilation_rates.size(); ++i)
    if (dilation_rates[i] <= dilation_rates[i - 1])
      throw ParameterError("block spec: dilation rates must be strictly increasing");
  if (out_channels < branch_count) throw ParameterError("block spec: fewer output channels than branches");
  if (kind == BlockKind::kDwEsp && (in_channels != out_channels || stride != 1))
    throw ParameterError("block spec: depth-wise ESP needs equal in/out channels and stride 1");
  if (kind == BlockKind::kStrideEsp && stride != 2) throw ParameterError("block spec: stride ESP needs stride 2");
}

std::vector<int64_t> BlockSpec::branch_widths() const {
  const int64_t d = reduced_width();
  std::vector<int64_t> w(static_cast<size_t>(branch_count), d);
  w[0] = out_channels - d * (branch_count - 1);
  return w;
}

std::vector<Var<float>> hff(const std::vector<Var<float>>& branches) {
  std::vector<Var<float>> fused;
  fused.reserve(branches.size());
  for (size_t k = 0; k < branches.size(); ++k)
    fused.push_back(k <= 1 ? branches[k] : add(fused.back(), branches[k]));
  return fused;
}

EspBlock::EspBlock(Builder& b, std::string n, BlockSpec s, int64_t in_scale) : name(std::move(n)), spec(std::move(s)) {
  spec.validate();
  const int64_t d = spec.reduced_width();
  const auto widths = spec.branch_widths();
  const bool strided = spec.kind == BlockKind::kStrideEsp;
  ConvLayer r;
  r.name = name + ".reduce";
  r.cin = spec.in_channels, r.cout = d, r.in_scale = in_scale;
  if (strided) r.k = 3, r.stride = 2, r.pad = 1;
  reduce = Conv(b, r);
  const int64_t scale = in_scale * spec.stride;
  for (int64_t k = 0; k < spec.branch_count; ++k) {
    const int64_t dil = spec.dilation_rates[static_cast<size_t>(k)];
    const std::string bn = name + ".branch" + std::to_string(k + 1);
    ConvLayer sp;
    sp.k = 3, sp.dilation = dil, sp.pad = dil, sp.in_scale = scale, sp.cin = d;
    if (strided) {
      sp.name = bn;
      sp.cout = widths[static_cast<size_t>(k)];
      spatial.emplace_back(b, sp);
    } else {
      sp.name = bn + ".dw";
      sp.cout = d, sp.groups = d;
      spatial.emplace_back(b, sp);
      ConvLayer pw;
      pw.name = bn + ".pw";
      pw.cin = d, pw.cout = widths[static_cast<size_t>(k)], pw.in_scale = scale;
      pointwise.emplace_back(b, pw);
    }
  }
  act = NormAct(b, name, spec.out_channels);
}

std::vector<Var<float>> EspBlock::branches(Ctx& ctx, const Var<float>& x) const {
  if (x.dim(1) != spec.in_channels)
    throw ParameterError(name + ": expected " + std::to_string(spec.in_channels) + " input channels, got " +
                         std::to_string(x.dim(1)));
  const Var<float> r = reduce(ctx, x);
  std::vector<Var<float>> out;
  for (size_t k = 0; k < spatial.size(); ++k) {
    Var<float> y = spatial[k](ctx, r);
    if (!pointwise.empty()) y = pointwise[k](ctx, y);
    out.push_back(std::move(y));
  }
  return out;
}

Var<float> EspBlock::operator()(Ctx& ctx, const Var<float>& x) const {
  Var<float> y = act(ctx, concat_channels(hff(branches(ctx, x))));
  if (spec.kind == BlockKind::kDwEsp) y = add(y, x);
  return ctx.site(name, y);
}

// ------------------------------------------------------------------- SPP

Spp::Spp(Builder& b, const std::string& n, int64_t channels, int64_t in_scale)
    : reduce(b, n + ".reduce", channels, channels / 2, 1, 1, in_scale),
      merge(b, n + ".merge", 4 * (channels / 2), channels, 1, 1, in_scale) {}

Var<float> Spp::operator()(Ctx& ctx, const Var<float>& x) const {
  const Var<float> r = reduce(ctx, x);
  std::vector<Var<float>> parts{r};
  for (int64_t k : kernels) parts.push_back(pool2d(r, PoolMode::kMax, {k, k}, {1, 1}, {k / 2, k / 2}));
  return merge(ctx, concat_channels(parts));
}

// ------------------------------------------------------------------ PCAA

Pcaa::Pcaa(Builder& b, const std::string& n, int64_t cin, int64_t cout, int64_t p, int64_t in_scale)
    : name(n), project(), patch(p) {
  ConvLayer c;
  c.name = n + ".classes", c.cin = cin, c.cout = 2, c.bias = true, c.in_scale = in_scale;
  classes = Conv(b, c);
  ConvLayer q;
  q.name = n + ".query", q.cin = cin, q.cout = cin, q.in_scale = in_scale;
  query = Conv(b, q);
  project = ConvBNAct(b, n + ".project", 2 * cin, cout, 1, 1, in_scale);
}

Var<float> Pcaa::operator()(Ctx& ctx, const Var<float>& x) const {
  if (x.dim(2) % patch != 0 || x.dim(3) % patch != 0)
    throw ParameterError(name + ": spatial dims " + x.shape().str() + " not divisible by patch " +
                         std::to_string(patch));
  const Var<float> logits = classes(ctx, x);
  const Var<float> att = ctx.site(name + ".attend", class_center_attention(x, query(ctx, x), logits, patch));
  return project(ctx, concat_channels<float>({x, att}));
}

Tensor<float> Pcaa::attention_weights(Ctx& ctx, const Var<float>& x) const {
  return class_center_attention_weights(x.value(), query(ctx, x).value(), classes(ctx, x).value(), patch);
}

// --------------------------------------------------------------- LitePAN

LitePan::LitePan(Builder& b, const std::string& n, int64_t c3, int64_t c4, int64_t c5, int64_t p)
    : lateral3(b, n + ".lateral3", c3, p, 1, 1, 8),
      lateral4(b, n + ".lateral4", c4, p, 1, 1, 16),
      lateral5(b, n + ".lateral5", c5, p, 1, 1, 32),
      top4(b, n + ".top4", p, 1, 16),
      top3(b, n + ".top3", p, 1, 8),
      down4(b, n + ".down4", p, 2, 8),
      fuse4(b, n + ".fuse4", p, 1, 16),
      down5(b, n + ".down5", p, 2, 16),
      fuse5(b, n + ".fuse5", p, 1, 32) {}

std::array<Var<float>, 3> LitePan::operator()(Ctx& ctx, const Var<float>& c3, const Var<float>& c4,
                                              const Var<float>& c5) const {
  const Var<float> t5 = lateral5(ctx, c5);
  const Var<float> t4 = top4(ctx, add(resample_nearest(t5, 2), lateral4(ctx, c4)));
  const Var<float> t3 = top3(ctx, add(resample_nearest(t4, 2), lateral3(ctx, c3)));
  const Var<float> p4 = fuse4(ctx, add(down4(ctx, t3), t4));
  const Var<float> p5 = fuse5(ctx, add(down5(ctx, p4), t5));
  return {t3, p4, p5};
}

// ------------------------------------------------------- segmentation head

namespace {

Conv upsample(Builder& b, const std::string& n, int64_t cin, int64_t cout, int64_t in_scale) {
  ConvLayer l;
  l.name = n, l.cin = cin, l.cout = cout, l.k = 2, l.stride = 2, l.transposed = true, l.in_scale = in_scale;
  return Conv(b, l);
}

}  // namespace

SegHead::SegHead(Builder& b, const std::string& n, int64_t f, int64_t u1, int64_t u2) : name(n) {
  up1 = upsample(b, n + ".up1", f, u1, 8);
  up1_act = NormAct(b, n + ".up1", u1);
  refine1a = ConvBNAct(b, n + ".refine1a", u1 + 3, u1, 3, 1, 4);
  refine1b = ConvBNAct(b, n + ".refine1b", u1, u1, 3, 1, 4);
  up2 = upsample(b, n + ".up2", u1, u2, 4);
  up2_act = NormAct(b, n + ".up2", u2);
  refine2a = ConvBNAct(b, n + ".refine2a", u2 + 3, u2, 3, 1, 2);
  refine2b = ConvBNAct(b, n + ".refine2b", u2, u2, 3, 1, 2);
  up3 = upsample(b, n + ".up3", u2, u2, 2);
  up3_act = NormAct(b, n + ".up3", u2);
  ConvLayer o;
  o.name = n + ".out", o.cin = u2, o.cout = 2, o.k = 3, o.pad = 1, o.bias = true, o.in_scale = 1;
  out = Conv(b, o);
}

Var<float> SegHead::operator()(Ctx& ctx, const Var<float>& f, const Var<float>& i1, const Var<float>& i2) const {
  Var<float> a = ctx.site(name + ".up1", up1_act(ctx, up1(ctx, f)));
  a = ctx.tag(name + ".U1", refine1b(ctx, refine1a(ctx, concat_channels<float>({a, i2}))));
  a = ctx.site(name + ".up2", up2_act(ctx, up2(ctx, a)));
  a = ctx.tag(name + ".U2", refine2b(ctx, refine2a(ctx, concat_channels<float>({a, i1}))));
  a = ctx.site(name + ".up3", up3_act(ctx, up3(ctx, a)));
  return ctx.tag(name + ".O", ctx.site(name + ".out", out(ctx, a)));
}

// ---------------------------------------------------------- detection head

DetHead::DetHead(Builder& b, const std::string& n, int64_t width) {
  const int64_t scales[3] = {8, 16, 32};
  for (int i = 0; i < 3; ++i) {
    ConvLayer l;
    l.name = n + ".p" + std::to_string(i + 3);
    l.cin = width, l.cout = kDetChannels, l.bias = true, l.in_scale = scales[i];
    heads[static_cast<size_t>(i)] = Conv(b, l);
  }
}

std::array<Var<float>, 3> DetHead::operator()(Ctx& ctx, const std::array<Var<float>, 3>& p) const {
  std::array<Var<float>, 3> out;
  for (size_t i = 0; i < 3; ++i) out[i] = ctx.site(heads[i].layer.name, heads[i](ctx, p[i]));
  return out;
}

}  // namespace tln
