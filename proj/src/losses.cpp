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

#include "tln/losses.hpp"

#include <cmath>
#include <sstream>

#include "box_math.hpp"
#include "op_util.hpp"
#include "tln/ops.hpp"

namespace tln {

void LossWeights::validate() const {
  for (double v : {cls, obj, reg, det, da, ll, focal_alpha})
    if (!(v > 0)) throw ParameterError("loss weights must be positive");
  if (focal_gamma < 0) throw ParameterError("focal gamma must be non-negative");
  for (const auto& t : {tversky_da, tversky_ll})
    if (!(t.alpha > 0 && t.alpha < 1 && t.beta > 0 && t.beta < 1))
      throw ParameterError("tversky alpha and beta must lie in (0, 1)");
  if (tversky_smooth < 0) throw ParameterError("tversky smoothing must be non-negative");
}

void LossReport::combine(const LossWeights& w) {
  det = detection_weighted(cls, obj, reg, w);
  da = focal_da + tversky_da;
  ll = focal_ll + tversky_ll;
  total = total_weighted(det, da, ll, w);
}

std::string LossReport::format(int64_t step) const {
  std::ostringstream o;
  o.precision(9);
  const std::pair<const char*, double> terms[] = {{"cls", cls},           {"obj", obj},        {"reg", reg},
                                                  {"det", det},           {"focal_da", focal_da},
                                                  {"tversky_da", tversky_da}, {"da", da},  {"focal_ll", focal_ll},
                                                  {"tversky_ll", tversky_ll}, {"ll", ll},  {"total", total}};
  for (const auto& [name, v] : terms) o << name << ' ' << step << ' ' << v << '\n';
  return o.str();
}

double bce_with_logit(double x, double y) { return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x))); }

namespace {

constexpr double kProbFloor = 1e-12;

template <class T>
void check_mask(const Var<T>& probs, const Tensor<T>& target, const char* op) {
  detail::require_nchw(probs, op);
  if (target.rank() != 4 || target.dim(0) != probs.dim(0) || target.dim(1) != 1 || target.dim(2) != probs.dim(2) ||
      target.dim(3) != probs.dim(3))
    throw ParameterError(std::string(op) + ": target must be (N,1,H,W) matching the probabilities");
}

template <class T>
Var<T> scalar_result(double value, const Var<T>& input, Tensor<T> dinput, const char* op) {
  Tensor<T> out(Shape{1}, static_cast<T>(value));
  require_finite(out, op);
  Tape<T>* tape = input.tape();
  if (!tape) return constant(std::move(out));
  auto in = input.node();
  return tape->record(std::move(out), {in}, [in, d = std::move(dinput)](Node<T>& self) {
    Tensor<T> g = d;
    const T s = self.grad[0];
    for (auto& v : g.vec()) v *= s;
    detail::accumulate(*in, std::move(g));
  });
}

}  // namespace

template <class T>
Var<T> focal_loss(const Var<T>& probs, const Tensor<T>& target, double alpha, double gamma) {
  check_mask(probs, target, "focal_loss");
  const int64_t n = probs.dim(0), c = probs.dim(1), plane = probs.dim(2) * probs.dim(3);
  const double count = static_cast<double>(n * plane);
  const T* p = probs.value().data();
  Tensor<T> d(probs.shape());
  double total = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t q = 0; q < plane; ++q) {
      const double tv = static_cast<double>(target[i * plane + q]);
      const int64_t t = static_cast<int64_t>(tv);
      if (t < 0 || t >= c || double(t) != tv) throw ParameterError("focal_loss: target class out of range");
      const int64_t at = (i * c + t) * plane + q;
      const double pt = static_cast<double>(p[at]), pc = std::max(pt, kProbFloor), one_minus = 1.0 - pt;
      const double mod = gamma == 0 ? 1.0 : std::pow(std::max(one_minus, 0.0), gamma);
      total += -alpha * mod * std::log(pc);
      double dmod = 0;
      if (gamma != 0 && one_minus > 0) dmod = -gamma * std::pow(one_minus, gamma - 1);
      const double dlog = pt > kProbFloor ? 1.0 / pt : 0.0;
      d[at] = static_cast<T>(-alpha * (dmod * std::log(pc) + mod * dlog) / count);
    }
  return scalar_result(total / count, probs, std::move(d), "focal_loss");
}

template <class T>
Var<T> tversky_loss(const Var<T>& probs, const Tensor<T>& target, double alpha, double beta, double smooth) {
  check_mask(probs, target, "tversky_loss");
  if (probs.dim(1) != 2) throw ParameterError("tversky_loss: expected two-channel probabilities");
  const int64_t n = probs.dim(0), plane = probs.dim(2) * probs.dim(3);
  const T* p = probs.value().data();
  double tp = 0, fn = 0, fp = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t q = 0; q < plane; ++q) {
      const double y = static_cast<double>(target[i * plane + q]), f = static_cast<double>(p[(i * 2 + 1) * plane + q]);
      tp += f * y, fn += (1 - f) * y, fp += f * (1 - y);
    }
  const double num = tp + smooth, den = tp + alpha * fn + beta * fp + smooth;
  if (!(den > 0)) throw ParameterError("tversky_loss: empty prediction and target without smoothing");
  Tensor<T> d(probs.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t q = 0; q < plane; ++q) {
      const double y = static_cast<double>(target[i * plane + q]);
      const double dden = y - alpha * y + beta * (1 - y);
      d[(i * 2 + 1) * plane + q] = static_cast<T>(-(y * den - num * dden) / (den * den));
    }
  return scalar_result(1.0 - num / den, probs, std::move(d), "tversky_loss");
}

template <class T>
Var<T> detection_terms(const std::array<Var<T>, 3>& det_raw, const TargetMap& targets, const AnchorSet& anchors) {
  for (int s = 0; s < 3; ++s) {
    const Var<T>& r = det_raw[s];
    detail::require_nchw(r, "detection_terms");
    if (r.dim(0) != targets.batch || r.dim(1) != kDetChannels || r.dim(2) != targets.grids[s].first ||
        r.dim(3) != targets.grids[s].second)
      throw ParameterError("detection_terms: head output geometry does not match the targets");
  }
  Tape<T>* tape = common_tape<T>({&det_raw[0], &det_raw[1], &det_raw[2]});
  std::array<Tensor<T>, 3> g_cls, g_obj, g_reg;
  double obj_count = 0;
  for (int s = 0; s < 3; ++s) {
    g_cls[s] = g_obj[s] = g_reg[s] = Tensor<T>(det_raw[s].shape());
    obj_count += static_cast<double>(det_raw[s].value().numel() / kSlotChannels);
  }

  double obj = 0;
  for (int s = 0; s < 3; ++s) {
    const int64_t n = det_raw[s].dim(0), plane = det_raw[s].dim(2) * det_raw[s].dim(3);
    const T* raw = det_raw[s].value().data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t a = 0; a < kAnchorsPerCell; ++a)
        for (int64_t q = 0; q < plane; ++q) {
          const int64_t at = ((i * kDetChannels) + a * kSlotChannels + 4) * plane + q;
          const double x = static_cast<double>(raw[at]);
          const double y = static_cast<double>(targets.objectness[s][(i * kAnchorsPerCell + a) * plane + q]);
          obj += bce_with_logit(x, y);
          g_obj[s][at] = static_cast<T>((detail::sigmoid(x) - y) / obj_count);
        }
  }
  obj /= obj_count;

  double cls = 0, reg = 0;
  const double npos = static_cast<double>(targets.positives.size());
  using D = detail::Dual<4>;
  for (const Positive& p : targets.positives) {
    const int64_t gh = det_raw[p.scale].dim(2), gw = det_raw[p.scale].dim(3), plane = gh * gw;
    const T* raw = det_raw[p.scale].value().data();
    const int64_t base = (p.batch * kDetChannels + p.anchor * kSlotChannels) * plane + p.gy * gw + p.gx;
    const double xc = static_cast<double>(raw[base + 5 * plane]);
    const double cls_target = p.class_id == 0 ? 1.0 : 0.0;
    cls += bce_with_logit(xc, cls_target);
    g_cls[p.scale][base + 5 * plane] += static_cast<T>((detail::sigmoid(xc) - cls_target) / npos);

    const double st = static_cast<double>(AnchorSet::kStrides[p.scale]);
    const auto [aw, ah] = anchors.groups[p.scale][p.anchor];
    std::array<D, 4> t;
    for (int k = 0; k < 4; ++k) t[k] = D::variable(static_cast<double>(raw[base + k * plane]), k);
    const D cx = (D(2.0) * sigmoid(t[0]) - D(0.5) + D(double(p.gx))) * D(st);
    const D cy = (D(2.0) * sigmoid(t[1]) - D(0.5) + D(double(p.gy))) * D(st);
    const D sw = D(2.0) * sigmoid(t[2]), sh = D(2.0) * sigmoid(t[3]);
    const D hw = sw * sw * D(0.5 * aw), hh = sh * sh * D(0.5 * ah);
    const detail::BoxT<D> pred{cx - hw, cy - hh, cx + hw, cy + hh};
    const detail::BoxT<D> gt{D(p.target.x1), D(p.target.y1), D(p.target.x2), D(p.target.y2)};
    const D ciou = detail::iou_impl(pred, gt, true);
    reg += 1.0 - ciou.v;
    for (int k = 0; k < 4; ++k) g_reg[p.scale][base + k * plane] += static_cast<T>(-ciou.d[k] / npos);
  }
  if (npos > 0) cls /= npos, reg /= npos;

  Tensor<T> out(Shape{3});
  out[0] = static_cast<T>(cls), out[1] = static_cast<T>(obj), out[2] = static_cast<T>(reg);
  require_finite(out, "detection_terms");
  if (!tape) return constant(std::move(out));
  std::vector<std::shared_ptr<Node<T>>> ins{det_raw[0].node(), det_raw[1].node(), det_raw[2].node()};
  return tape->record(std::move(out), ins,
                      [ins, g_cls = std::move(g_cls), g_obj = std::move(g_obj), g_reg = std::move(g_reg)](Node<T>& self) {
                        for (int s = 0; s < 3; ++s) {
                          if (!detail::wants_grad(ins[s])) continue;
                          Tensor<T> g(g_cls[s].shape());
                          for (int64_t i = 0; i < g.numel(); ++i)
                            g[i] = self.grad[0] * g_cls[s][i] + self.grad[1] * g_obj[s][i] + self.grad[2] * g_reg[s][i];
                          detail::accumulate(*ins[s], std::move(g));
                        }
                      });
}

template <class T>
LossOutput<T> total_loss(const std::array<Var<T>, 3>& det_raw, const Var<T>& da_logits, const Var<T>& ll_logits,
                         const TargetMap& targets, const AnchorSet& anchors, const Tensor<T>& da_mask,
                         const Tensor<T>& ll_mask, const LossWeights& w) {
  const Var<T> det = detection_terms(det_raw, targets, anchors);
  const Var<T> pda = softmax_channels(da_logits), pll = softmax_channels(ll_logits);
  const Var<T> fda = focal_loss(pda, da_mask, w.focal_alpha, w.focal_gamma);
  const Var<T> tda = tversky_loss(pda, da_mask, w.tversky_da.alpha, w.tversky_da.beta, w.tversky_smooth);
  const Var<T> fll = focal_loss(pll, ll_mask, w.focal_alpha, w.focal_gamma);
  const Var<T> tll = tversky_loss(pll, ll_mask, w.tversky_ll.alpha, w.tversky_ll.beta, w.tversky_smooth);

  LossOutput<T> out;
  auto& r = out.report;
  r.cls = det.value()[0], r.obj = det.value()[1], r.reg = det.value()[2];
  r.focal_da = fda.value()[0], r.tversky_da = tda.value()[0];
  r.focal_ll = fll.value()[0], r.tversky_ll = tll.value()[0];
  r.combine(w);
  out.total = linear_combination<T>({pick(det, 0), pick(det, 1), pick(det, 2), fda, tda, fll, tll},
                                    {T(w.det * w.cls), T(w.det * w.obj), T(w.det * w.reg), T(w.da), T(w.da), T(w.ll),
                                     T(w.ll)});
  return out;
}

#define TLN_INSTANTIATE(T)                                                                                      \
  template Var<T> focal_loss(const Var<T>&, const Tensor<T>&, double, double);                                 \
  template Var<T> tversky_loss(const Var<T>&, const Tensor<T>&, double, double, double);                       \
  template Var<T> detection_terms(const std::array<Var<T>, 3>&, const TargetMap&, const AnchorSet&);            \
  template LossOutput<T> total_loss(const std::array<Var<T>, 3>&, const Var<T>&, const Var<T>&, const TargetMap&, \
                                    const AnchorSet&, const Tensor<T>&, const Tensor<T>&, const LossWeights&);

TLN_INSTANTIATE(float)
TLN_INSTANTIATE(double)
#undef TLN_INSTANTIATE

}  // namespace tln
