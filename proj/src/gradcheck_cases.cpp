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

#include "gradcheck_cases.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "tln/ops.hpp"

namespace tln::gradcheck {

int64_t pick_int(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

Tensor<double> uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  Tensor<double> t(s);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

Tensor<double> away_from_zero(const Shape& s, std::mt19937_64& rng, double margin) {
  Tensor<double> t = uniform(s, rng, margin, 1.0);
  std::bernoulli_distribution neg(0.5);
  for (auto& v : t.vec())
    if (neg(rng)) v = -v;
  return t;
}

namespace {

// Well-separated values so that max-pool winners do not change under the
// finite-difference step.
Tensor<double> distinct(const Shape& s, std::mt19937_64& rng) {
  Tensor<double> t(s);
  std::vector<int64_t> order(static_cast<size_t>(t.numel()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = 0.05 * static_cast<double>(order[static_cast<size_t>(i)]) - 1.0;
  return t;
}

std::string geom(std::initializer_list<std::pair<const char*, int64_t>> kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += std::string(s.empty() ? "" : " ") + k + "=" + std::to_string(v);
  return s;
}

Instance conv_instance(std::mt19937_64& rng) {
  const int kind = static_cast<int>(pick_int(rng, 0, 2));  // 0 dense, 1 grouped, 2 depthwise
  const int64_t groups = kind == 0 ? 1 : kind == 1 ? pick_int(rng, 2, 3) : pick_int(rng, 1, 4);
  const int64_t cin = kind == 2 ? groups : groups * pick_int(rng, 1, 2);
  const int64_t cout = kind == 2 ? groups : groups * pick_int(rng, 1, 2);
  const int64_t kh = pick_int(rng, 1, 3), kw = pick_int(rng, 1, 3);
  const int64_t sh = pick_int(rng, 1, 2), sw = pick_int(rng, 1, 2);
  const int64_t dh = pick_int(rng, 1, 2), dw = pick_int(rng, 1, 2);
  const int64_t ph = pick_int(rng, 0, 2), pw = pick_int(rng, 0, 2);
  const int64_t n = pick_int(rng, 1, 2);
  const int64_t h = std::max(pick_int(rng, 3, 6), dh * (kh - 1) + 1 - 2 * ph);
  const int64_t w = std::max(pick_int(rng, 3, 6), dw * (kw - 1) + 1 - 2 * pw);
  const bool with_bias = pick_int(rng, 0, 1) == 1;
  ConvArgs args{{sh, sw}, {ph, pw}, {dh, dw}, groups};
  Instance inst;
  inst.inputs = {uniform(Shape{n, cin, h, w}, rng), uniform(Shape{cout, cin / groups, kh, kw}, rng)};
  if (with_bias) inst.inputs.push_back(uniform(Shape{cout}, rng));
  inst.fn = [args, with_bias](const std::vector<Var<double>>& v) {
    return conv2d(v[0], v[1], with_bias ? v[2] : Var<double>(), args);
  };
  inst.geometry = geom({{"n", n}, {"cin", cin}, {"cout", cout}, {"groups", groups}, {"h", h}, {"w", w}, {"kh", kh},
                        {"kw", kw}, {"stride", sh * 10 + sw}, {"dil", dh * 10 + dw}, {"pad", ph * 10 + pw}});
  return inst;
}

Instance tconv_instance(std::mt19937_64& rng) {
  const int64_t cin = pick_int(rng, 1, 3), cout = pick_int(rng, 1, 3);
  const int64_t k = pick_int(rng, 1, 3), s = pick_int(rng, 1, 2);
  const int64_t p = pick_int(rng, 0, k - 1);
  // Smallest input extent whose output (e-1)s - 2p + k is non-empty.
  const int64_t min_extent = std::max<int64_t>(2, (2 * p - k + s) / s + 1);
  const int64_t n = pick_int(rng, 1, 2);
  const int64_t h = std::max(pick_int(rng, 2, 4), min_extent), w = std::max(pick_int(rng, 2, 4), min_extent);
  const bool with_bias = pick_int(rng, 0, 1) == 1;
  Instance inst;
  inst.inputs = {uniform(Shape{n, cin, h, w}, rng), uniform(Shape{cin, cout, k, k}, rng)};
  if (with_bias) inst.inputs.push_back(uniform(Shape{cout}, rng));
  inst.fn = [s, p, with_bias](const std::vector<Var<double>>& v) {
    return conv_transpose2d(v[0], v[1], with_bias ? v[2] : Var<double>(), {s, s}, {p, p});
  };
  inst.geometry = geom({{"n", n}, {"cin", cin}, {"cout", cout}, {"h", h}, {"w", w}, {"k", k}, {"stride", s}, {"pad", p}});
  return inst;
}

Instance pool_instance(std::mt19937_64& rng, PoolMode mode) {
  const int64_t k = mode == PoolMode::kMax ? std::vector<int64_t>{2, 3, 5}[pick_int(rng, 0, 2)] : pick_int(rng, 1, 3);
  const int64_t s = pick_int(rng, 1, 2), p = pick_int(rng, 0, (k - 1) / 2);
  const int64_t n = pick_int(rng, 1, 2), c = pick_int(rng, 1, 3);
  const int64_t h = pick_int(rng, k, k + 3), w = pick_int(rng, k, k + 3);
  Instance inst;
  inst.inputs = {mode == PoolMode::kMax ? distinct(Shape{n, c, h, w}, rng) : uniform(Shape{n, c, h, w}, rng)};
  inst.fn = [mode, k, s, p](const std::vector<Var<double>>& v) { return pool2d(v[0], mode, {k, k}, {s, s}, {p, p}); };
  inst.geometry = geom({{"n", n}, {"c", c}, {"h", h}, {"w", w}, {"k", k}, {"stride", s}, {"pad", p}});
  return inst;
}

Shape random_nchw(std::mt19937_64& rng, int64_t cmin = 1, int64_t cmax = 3) {
  return Shape{pick_int(rng, 1, 2), pick_int(rng, cmin, cmax), pick_int(rng, 1, 4), pick_int(rng, 1, 4)};
}

Instance unary(std::mt19937_64& rng, Shape s, std::function<Var<double>(const Var<double>&)> f) {
  Instance inst;
  inst.inputs = {uniform(s, rng, -2.0, 2.0)};
  inst.fn = [f](const std::vector<Var<double>>& v) { return f(v[0]); };
  inst.geometry = "shape=" + s.str();
  return inst;
}

Instance binary(std::mt19937_64& rng, std::function<Var<double>(const Var<double>&, const Var<double>&)> f) {
  const Shape s = random_nchw(rng);
  Instance inst;
  inst.inputs = {uniform(s, rng), uniform(s, rng)};
  inst.fn = [f](const std::vector<Var<double>>& v) { return f(v[0], v[1]); };
  inst.geometry = "shape=" + s.str();
  return inst;
}

Instance batchnorm_instance(std::mt19937_64& rng, bool training) {
  Shape s = random_nchw(rng);
  if (training && s[0] * s[2] * s[3] < 2) s = Shape{2, s[1], s[2], s[3]};
  const int64_t c = s[1];
  auto mean = std::make_shared<Tensor<double>>(uniform(Shape{c}, rng, -0.5, 0.5));
  auto var = std::make_shared<Tensor<double>>(uniform(Shape{c}, rng, 0.5, 2.0));
  Instance inst;
  inst.inputs = {uniform(s, rng, -2.0, 2.0), uniform(Shape{c}, rng, 0.5, 1.5), uniform(Shape{c}, rng)};
  inst.fn = [mean, var, training](const std::vector<Var<double>>& v) {
    BatchNormState<double> st{mean.get(), var.get()};
    return batchnorm(v[0], v[1], v[2], st, training);
  };
  inst.geometry = "shape=" + s.str();
  return inst;
}

Instance attention_instance(std::mt19937_64& rng) {
  const int64_t n = pick_int(rng, 1, 2), c = pick_int(rng, 1, 4), h = pick_int(rng, 2, 6), w = pick_int(rng, 2, 6);
  const int64_t patch = pick_int(rng, 1, 4);
  Instance inst;
  inst.inputs = {uniform(Shape{n, c, h, w}, rng), uniform(Shape{n, c, h, w}, rng), uniform(Shape{n, 2, h, w}, rng, -2, 2)};
  inst.fn = [patch](const std::vector<Var<double>>& v) { return class_center_attention(v[0], v[1], v[2], patch); };
  inst.geometry = geom({{"n", n}, {"c", c}, {"h", h}, {"w", w}, {"patch", patch}});
  return inst;
}

}  // namespace

std::vector<Case> op_cases() {
  std::vector<Case> cases;
  cases.push_back({"conv2d", conv_instance});
  cases.push_back({"conv_transpose2d", tconv_instance});
  cases.push_back({"pool2d_avg", [](std::mt19937_64& r) { return pool_instance(r, PoolMode::kAvg); }});
  cases.push_back({"pool2d_max", [](std::mt19937_64& r) { return pool_instance(r, PoolMode::kMax); }});
  cases.push_back({"resample_nearest", [](std::mt19937_64& r) {
                     const int64_t s = pick_int(r, 1, 3);
                     Instance i = unary(r, random_nchw(r), [s](const Var<double>& x) { return resample_nearest(x, s); });
                     i.geometry += " scale=" + std::to_string(s);
                     return i;
                   }});
  cases.push_back({"add", [](std::mt19937_64& r) {
                     return binary(r, [](const Var<double>& a, const Var<double>& b) { return add(a, b); });
                   }});
  cases.push_back({"mul", [](std::mt19937_64& r) {
                     return binary(r, [](const Var<double>& a, const Var<double>& b) { return mul(a, b); });
                   }});
  cases.push_back({"concat_channels", [](std::mt19937_64& r) {
                     const Shape s = random_nchw(r);
                     const int64_t parts = pick_int(r, 2, 3);
                     Instance inst;
                     for (int64_t p = 0; p < parts; ++p)
                       inst.inputs.push_back(uniform(Shape{s[0], pick_int(r, 1, 3), s[2], s[3]}, r));
                     inst.fn = [](const std::vector<Var<double>>& v) { return concat_channels(v); };
                     inst.geometry = "base=" + s.str() + " parts=" + std::to_string(parts);
                     return inst;
                   }});
  cases.push_back({"sigmoid", [](std::mt19937_64& r) {
                     return unary(r, random_nchw(r), [](const Var<double>& x) { return sigmoid(x); });
                   }});
  cases.push_back({"softmax_channels", [](std::mt19937_64& r) {
                     return unary(r, random_nchw(r, 2, 4), [](const Var<double>& x) { return softmax_channels(x); });
                   }});
  cases.push_back({"prelu", [](std::mt19937_64& r) {
                     const Shape s = random_nchw(r);
                     Instance inst;
                     inst.inputs = {away_from_zero(s, r), uniform(Shape{s[1]}, r, 0.0, 0.5)};
                     inst.fn = [](const std::vector<Var<double>>& v) { return prelu(v[0], v[1]); };
                     inst.geometry = "shape=" + s.str();
                     return inst;
                   }});
  cases.push_back({"batchnorm_train", [](std::mt19937_64& r) { return batchnorm_instance(r, true); }});
  cases.push_back({"batchnorm_eval", [](std::mt19937_64& r) { return batchnorm_instance(r, false); }});
  cases.push_back({"sum", [](std::mt19937_64& r) {
                     return unary(r, random_nchw(r), [](const Var<double>& x) { return sum(x); });
                   }});
  cases.push_back({"scale", [](std::mt19937_64& r) {
                     const double f = uniform(Shape{1}, r, -2.0, 2.0)[0];
                     return unary(r, random_nchw(r), [f](const Var<double>& x) { return scale(x, f); });
                   }});
  cases.push_back({"pick", [](std::mt19937_64& r) {
                     const Shape s = random_nchw(r);
                     const int64_t idx = pick_int(r, 0, s.numel() - 1);
                     return unary(r, s, [idx](const Var<double>& x) { return pick(x, idx); });
                   }});
  cases.push_back({"linear_combination", [](std::mt19937_64& r) {
                     const int64_t k = pick_int(r, 1, 4);
                     Instance inst;
                     std::vector<double> wts;
                     for (int64_t i = 0; i < k; ++i) {
                       inst.inputs.push_back(uniform(Shape{1}, r));
                       wts.push_back(uniform(Shape{1}, r, -2.0, 2.0)[0]);
                     }
                     inst.fn = [wts](const std::vector<Var<double>>& v) { return linear_combination(v, wts); };
                     inst.geometry = "terms=" + std::to_string(k);
                     return inst;
                   }});
  cases.push_back({"class_center_attention", attention_instance});
  return cases;
}

std::vector<Case> all_cases() {
  std::vector<Case> cases = op_cases();
  for (auto& c : loss_cases()) cases.push_back(std::move(c));
  return cases;
}

}  // namespace tln::gradcheck
