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

#include <memory>

#include "tln/losses.hpp"
#include "tln/ops.hpp"

namespace tln::gradcheck {
namespace {

Tensor<double> class_mask(int64_t n, int64_t h, int64_t w, std::mt19937_64& rng) {
  Tensor<double> m(Shape{n, 1, h, w});
  for (auto& v : m.vec()) v = static_cast<double>(pick_int(rng, 0, 1));
  m[0] = 1.0;
  return m;
}

AnchorSet small_anchors() {
  AnchorSet a;
  a.groups = {{{{{4, 5}, {6, 8}, {9, 7}}}, {{{10, 14}, {16, 12}, {14, 20}}}, {{{20, 24}, {28, 22}, {30, 32}}}}};
  return a;
}

struct DetFixture {
  std::shared_ptr<TargetMap> targets;
  std::vector<Tensor<double>> raw;
  std::string geometry;
};

DetFixture det_fixture(std::mt19937_64& rng) {
  const int64_t n = pick_int(rng, 1, 2), h0 = 4 * pick_int(rng, 1, 2), w0 = 4 * pick_int(rng, 1, 2);
  const std::array<std::pair<int64_t, int64_t>, 3> grids{{{h0, w0}, {h0 / 2, w0 / 2}, {h0 / 4, w0 / 4}}};
  std::uniform_real_distribution<float> u(0.f, 1.f);
  std::vector<std::vector<GtBox>> gt(static_cast<size_t>(n));
  int64_t boxes = 0;
  for (auto& img : gt)
    for (int64_t k = pick_int(rng, 0, 3); k > 0; --k, ++boxes) {
      const float w = 4 + 24 * u(rng), h = 4 + 24 * u(rng);
      const float cx = w / 2 + (8 * w0 - w) * u(rng), cy = h / 2 + (8 * h0 - h) * u(rng);
      img.push_back({0, box_from_center(cx, cy, w, h)});
    }
  DetFixture f;
  f.targets = std::make_shared<TargetMap>(assign_targets(gt, small_anchors(), grids));
  for (const auto& [gh, gw] : grids) f.raw.push_back(uniform(Shape{n, kDetChannels, gh, gw}, rng, -1.5, 1.5));
  f.geometry = "n=" + std::to_string(n) + " grid=" + std::to_string(h0) + "x" + std::to_string(w0) +
               " boxes=" + std::to_string(boxes) + " positives=" + std::to_string(f.targets->positives.size());
  return f;
}

Instance focal_instance(std::mt19937_64& rng) {
  const int64_t n = pick_int(rng, 1, 2), c = pick_int(rng, 2, 3), h = pick_int(rng, 1, 4), w = pick_int(rng, 1, 4);
  const double gammas[] = {0.0, 1.0, 2.0, 2.5};
  const double alpha = 0.1 + 0.9 * uniform(Shape{1}, rng, 0, 1)[0], gamma = gammas[pick_int(rng, 0, 3)];
  Tensor<double> target(Shape{n, 1, h, w});
  for (auto& v : target.vec()) v = static_cast<double>(pick_int(rng, 0, c - 1));
  Instance inst;
  inst.inputs = {uniform(Shape{n, c, h, w}, rng, -2, 2)};
  inst.fn = [target, alpha, gamma](const std::vector<Var<double>>& v) {
    return focal_loss(softmax_channels(v[0]), target, alpha, gamma);
  };
  inst.geometry = "n=" + std::to_string(n) + " c=" + std::to_string(c) + " h=" + std::to_string(h) +
                  " w=" + std::to_string(w) + " gamma=" + std::to_string(gamma);
  return inst;
}

Instance tversky_instance(std::mt19937_64& rng) {
  const int64_t n = pick_int(rng, 1, 2), h = pick_int(rng, 1, 4), w = pick_int(rng, 1, 4);
  const auto ab = uniform(Shape{2}, rng, 0.05, 0.95);
  const double smooth = static_cast<double>(pick_int(rng, 0, 1));
  const Tensor<double> target = class_mask(n, h, w, rng);
  Instance inst;
  inst.inputs = {uniform(Shape{n, 2, h, w}, rng, -2, 2)};
  inst.fn = [target, a = ab[0], b = ab[1], smooth](const std::vector<Var<double>>& v) {
    return tversky_loss(softmax_channels(v[0]), target, a, b, smooth);
  };
  inst.geometry = "n=" + std::to_string(n) + " h=" + std::to_string(h) + " w=" + std::to_string(w) +
                  " smooth=" + std::to_string(smooth);
  return inst;
}

Instance detection_instance(std::mt19937_64& rng) {
  DetFixture f = det_fixture(rng);
  Instance inst;
  inst.inputs = f.raw;
  inst.fn = [t = f.targets](const std::vector<Var<double>>& v) {
    return detection_terms<double>({v[0], v[1], v[2]}, *t, small_anchors());
  };
  inst.geometry = f.geometry;
  return inst;
}

Instance total_instance(std::mt19937_64& rng) {
  DetFixture f = det_fixture(rng);
  const int64_t n = f.targets->batch, h = pick_int(rng, 2, 4), w = pick_int(rng, 2, 4);
  const Tensor<double> da = class_mask(n, h, w, rng), ll = class_mask(n, h, w, rng);
  Instance inst;
  inst.inputs = f.raw;
  inst.inputs.push_back(uniform(Shape{n, 2, h, w}, rng, -2, 2));
  inst.inputs.push_back(uniform(Shape{n, 2, h, w}, rng, -2, 2));
  inst.fn = [t = f.targets, da, ll](const std::vector<Var<double>>& v) {
    return total_loss<double>({v[0], v[1], v[2]}, v[3], v[4], *t, small_anchors(), da, ll).total;
  };
  inst.geometry = f.geometry + " seg=" + std::to_string(h) + "x" + std::to_string(w);
  return inst;
}

}  // namespace

std::vector<Case> loss_cases() {
  return {{"focal_loss", focal_instance},
          {"tversky_loss", tversky_instance},
          {"detection_terms", detection_instance},
          {"total_loss", total_instance}};
}

}  // namespace tln::gradcheck
