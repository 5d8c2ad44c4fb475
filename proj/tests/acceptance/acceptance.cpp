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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tln/cli.hpp"
#include "tln/evaluate.hpp"
#include "tln/gradcheck.hpp"
#include "tln/losses.hpp"
#include "tln/quant.hpp"
#include "tln/train.hpp"

namespace {

using namespace tln;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string f(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tln_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ------------------------------------------------------------ 1. cost table

Verdict cost_table() {
  const auto t0 = Clock::now();
  struct Row {
    const char* name;
    double params, flops;  // published
  };
  const Row rows[3] = {{"tiny", 0.15e6, 0.55e9}, {"small", 0.59e6, 1.99e9}, {"base", 2.35e6, 7.72e9}};
  double got_p[3], got_f[3];
  bool ok = true;
  std::string d;
  for (int i = 0; i < 3; ++i) {
    const char* argv[] = {"tln", "summary", "--config", rows[i].name};
    std::ostringstream out, err;
    if (run_cli(4, argv, out, err) != 0) return {false, std::string("summary failed for ") + rows[i].name};
    std::map<std::string, double> kv;
    std::istringstream in(out.str());
    std::string k, v;
    while (in >> k >> v)
      if (k == "params" || k == "flops") kv[k] = std::stod(v);
    got_p[i] = kv["params"], got_f[i] = kv["flops"];
    const double ep = got_p[i] / rows[i].params - 1, ef = got_f[i] / rows[i].flops - 1;
    ok = ok && std::fabs(ep) <= 0.2 && std::fabs(ef) <= 0.2;
    d += std::string(rows[i].name) + " " + f("%.3fM", got_p[i] / 1e6) + " (" + f("%+.1f%%", 100 * ep) + ") " +
         f("%.2fG", got_f[i] / 1e9) + " (" + f("%+.1f%%", 100 * ef) + "); ";
  }
  const bool monotone = got_p[0] < got_p[1] && got_p[1] < got_p[2] && got_f[0] < got_f[1] && got_f[1] < got_f[2];
  const double ratio = got_p[2] / got_p[0];
  const double secs = seconds_since(t0);
  d += "base/tiny " + f("%.1f", ratio) + ", " + f("%.1fs", secs);
  return {ok && monotone && ratio >= 10 && ratio <= 25 && secs < 10, d};
}

// -------------------------------------------------------------- 2. shapes

Verdict shapes() {
  const auto t0 = Clock::now();
  // Published channel table: C1..C5, P, F, U1, U2.
  const std::map<std::string, std::array<int64_t, 9>> table{{"tiny", {8, 32, 64, 64, 64, 32, 16, 8, 4}},
                                                            {"small", {16, 64, 128, 128, 128, 64, 32, 16, 8}},
                                                            {"base", {32, 128, 256, 256, 256, 128, 64, 32, 16}}};
  int checked = 0;
  for (const auto& [name, c] : table) {
    const Model m = build(ModelConfig::named(name), 0);
    const std::map<std::string, Shape> want{
        {"C1", {1, c[0], 192, 320}},      {"C2", {1, c[1], 96, 160}},       {"C3", {1, c[2], 48, 80}},
        {"C4", {1, c[3], 24, 40}},        {"C5", {1, c[4], 12, 20}},        {"P3", {1, c[5], 48, 80}},
        {"P4", {1, c[5], 24, 40}},        {"P5", {1, c[5], 12, 20}},        {"F_pcaa", {1, c[6], 48, 80}},
        {"seg_da.U1", {1, c[7], 96, 160}}, {"seg_da.U2", {1, c[8], 192, 320}}, {"seg_ll.U1", {1, c[7], 96, 160}},
        {"seg_ll.U2", {1, c[8], 192, 320}}, {"det3", {1, 18, 48, 80}},      {"det4", {1, 18, 24, 40}},
        {"det5", {1, 18, 12, 20}},        {"seg_da.O", {1, 2, 384, 640}},   {"seg_ll.O", {1, 2, 384, 640}}};
    std::map<std::string, Shape> got;
    for (const auto& [k, s] : shape_table(m)) got.emplace(k, s);
    for (const auto& [k, s] : want) {
      const auto it = got.find(k);
      if (it == got.end()) return {false, name + ": no feature " + k};
      if (it->second != s) return {false, name + " " + k + ": " + it->second.str() + " != " + s.str()};
      ++checked;
    }
    const ModelOutput o = infer(m, Tensor<float>(Shape{1, 3, 384, 640}, 0.5f));
    if (o.det[0].shape() != Shape{1, 18, 48, 80} || o.det[1].shape() != Shape{1, 18, 24, 40} ||
        o.det[2].shape() != Shape{1, 18, 12, 20} || o.da.shape() != Shape{1, 2, 384, 640} ||
        o.ll.shape() != Shape{1, 2, 384, 640})
      return {false, name + ": forward output shapes differ"};
  }
  const double secs = seconds_since(t0);
  return {secs < 60, std::to_string(checked) + " feature maps exact, " + f("%.1fs", secs)};
}

// ------------------------------------------------------ 3. gradient suite

Verdict gradients() {
  const auto t0 = Clock::now();
  const auto results = run_gradient_suite(20, 2024, 1e-4);
  double worst = 0;
  std::string worst_op;
  bool ok = !results.empty();
  for (const auto& r : results) {
    ok = ok && r.passed && r.geometries >= 20 && r.max_rel_error < 1e-4;
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_op = r.op;
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 300, std::to_string(results.size()) + " ops x 20 geometries, worst " + worst_op + " " +
                                f("%.2e", worst) + ", " + f("%.1fs", secs)};
}

// ----------------------------------------------------------- 4. loss values

Var<double> fg_probs(const std::vector<double>& fg, int64_t h, int64_t w) {
  Tensor<double> t(Shape{1, 2, h, w});
  for (int64_t i = 0; i < h * w; ++i) t[i] = 1 - fg[i], t[h * w + i] = fg[i];
  return constant(std::move(t));
}

Verdict loss_values() {
  std::string d;
  bool ok = true;
  auto check = [&](const char* what, double got, double want, double tol) {
    const bool pass = std::fabs(got - want) <= tol;
    ok = ok && pass;
    d += std::string(what) + " " + f("%.7g", got) + (pass ? "" : " (want " + f("%.7g", want) + ")") + "; ";
  };
  check("det", detection_weighted(0.2, 0.4, 0.6), 0.53, 1e-6);
  check("total", total_weighted(1, 2, 3), 2.5, 1e-6);
  check("focal", focal_loss(fg_probs({0.9, 0.1}, 1, 2), Tensor<double>(Shape{1, 1, 1, 2}, {1, 0}), 0.25, 2).value()[0],
        2.6341e-4, 1e-6);
  std::vector<double> fg, m;
  for (auto [p, y, k] : {std::tuple{1, 1, 8}, {0, 1, 2}, {1, 0, 4}, {0, 0, 6}})
    for (int i = 0; i < k; ++i) fg.push_back(p), m.push_back(y);
  check("tversky", tversky_loss(fg_probs(fg, 4, 5), Tensor<double>(Shape{1, 1, 4, 5}, m), 0.7, 0.3, 0).value()[0],
        0.245283, 1e-6);

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  double worst_ce = 0, worst_dice = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(48), y(48);
    double ce = 0, tp = 0, ps = 0, ys = 0;
    for (size_t i = 0; i < 48; ++i) {
      p[i] = u(rng), y[i] = double(rng() % 2);
      ce -= std::log(y[i] == 1 ? p[i] : 1 - p[i]);
      tp += p[i] * y[i], ps += p[i], ys += y[i];
    }
    const Tensor<double> mask(Shape{1, 1, 6, 8}, y);
    worst_ce = std::max(worst_ce, std::fabs(focal_loss(fg_probs(p, 6, 8), mask, 1, 0).value()[0] - ce / 48));
    worst_dice = std::max(worst_dice, std::fabs(tversky_loss(fg_probs(p, 6, 8), mask, 0.5, 0.5, 0).value()[0] -
                                                (1 - 2 * tp / (ps + ys))));
  }
  ok = ok && worst_ce <= 1e-9 && worst_dice <= 1e-9;
  d += "focal-vs-CE " + f("%.1e", worst_ce) + "; tversky-vs-Dice " + f("%.1e", worst_dice);
  return {ok, d};
}

// ------------------------------------------------------------- 5. overfit

struct OverfitRun {
  TrainResult result;
  std::vector<Sample> train_set, val_set;
  double seconds = 0;
};

OverfitRun overfit_run() {
  OverfitRun r;
  const uint64_t seed = 2024;
  for (int64_t i = 0; i < 16; ++i) r.train_set.push_back(synth_scene(seed, i));
  for (int64_t i = 16; i < 24; ++i) r.val_set.push_back(synth_scene(seed, i));
  TrainHyper h;
  h.batch = 2;
  h.lr0 = 1e-2;
  h.max_steps = 300;
  h.epochs = 38;  // 300 steps of 8 batches
  const auto t0 = Clock::now();
  r.result = train(build(ModelConfig::named("tiny"), seed), r.train_set, h, seed);
  r.seconds = seconds_since(t0);
  return r;
}

Verdict overfit(const OverfitRun& r) {
  const double first = r.result.trace.front().loss.total, last = r.result.trace.back().loss.total;
  const Model m = r.result.inference_model();
  EvalOptions opt;
  opt.lane_width = kTrainLaneWidth;  // training-set labels
  opt.conf_threshold = kInferConfThreshold;
  const EvalRun e = evaluate(m, r.train_set, opt);
  int64_t with_vehicle = 0;
  for (const auto& d : e.detections) with_vehicle += d.empty() ? 0 : 1;
  const bool ok = last <= 0.1 * first && e.report.da_miou >= 0.85 && e.report.ll_iou >= 0.5 && with_vehicle == 16 &&
                  r.seconds <= 900;
  return {ok, "loss " + f("%.4f", first) + " -> " + f("%.4f", last) + " (" + f("%.1f%%", 100 * last / first) +
                  "), da mIoU " + f("%.4f", e.report.da_miou) + ", lane IoU " + f("%.4f", e.report.ll_iou) + ", " +
                  std::to_string(with_vehicle) + "/16 images with a vehicle, " + f("%.0fs", r.seconds)};
}

// ------------------------------------------------------ 6. oracle checks

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> pos(0, 50), size(1, 25);
  const float x = pos(rng), y = pos(rng);
  return {x, y, x + size(rng), y + size(rng)};
}

// Every subset is tried; the kept set is the one whose members are exactly
// the boxes not overlapped by a higher-priority member.
std::vector<Detection> nms_brute_force(const std::vector<Detection>& d, float thr) {
  const size_t n = d.size();
  auto before = [&](size_t j, size_t i) {
    return d[j].confidence > d[i].confidence || (d[j].confidence == d[i].confidence && j < i);
  };
  std::vector<size_t> found;
  int solutions = 0;
  for (uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool consistent = true;
    for (size_t i = 0; i < n && consistent; ++i) {
      bool suppressed = false;
      for (size_t j = 0; j < n; ++j)
        if ((mask >> j & 1) && j != i && before(j, i) && box_iou(d[j].box, d[i].box) >= thr) suppressed = true;
      consistent = ((mask >> i & 1) != 0) == !suppressed;
    }
    if (!consistent) continue;
    ++solutions;
    found.clear();
    for (size_t i = 0; i < n; ++i)
      if (mask >> i & 1) found.push_back(i);
  }
  if (solutions != 1) return {};
  std::sort(found.begin(), found.end(), [&](size_t a, size_t b) { return before(a, b); });
  std::vector<Detection> out;
  for (size_t i : found) out.push_back(d[i]);
  return out;
}

Verdict oracles() {
  std::mt19937_64 rng(99);
  int nms_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Detection> d(rng() % 11);
    for (auto& x : d) x = {random_box(rng), float(rng() % 8) / 8.f, 0};
    const float thr = 0.2f + 0.6f * float(rng() % 100) / 100.f;
    const auto got = nms(d, thr), want = nms_brute_force(d, thr);
    bool same = got.size() == want.size();
    for (size_t i = 0; same && i < got.size(); ++i)
      same = got[i].box == want[i].box && got[i].confidence == want[i].confidence;
    nms_ok += same;
  }

  // Three hand-checked cases.
  const Box g1{0, 0, 10, 10}, g2{50, 50, 60, 60}, off{100, 100, 110, 110};
  const double ap1 = eval_detection({{{g1, 0.9f, 0}}}, {{{0, g1}}}).map50;                         // 1
  const double ap2 = eval_detection({{{g1, 0.9f, 0}, {off, 0.8f, 0}, {g2, 0.7f, 0}}}, {{{0, g1}, {0, g2}}}).map50;  // 5/6
  const double ap3 = eval_detection({{{g1, 0.9f, 0}, {g1, 0.8f, 0}}}, {{{0, g1}, {0, g2}}}).map50;  // 1/2
  const bool map_ok =
      std::fabs(ap1 - 1) < 1e-12 && std::fabs(ap2 - 5.0 / 6.0) < 1e-12 && std::fabs(ap3 - 0.5) < 1e-12;

  std::vector<std::pair<float, float>> wh(60, {12.f, 20.f});
  wh.insert(wh.end(), 40, {80.f, 64.f});
  std::shuffle(wh.begin(), wh.end(), rng);
  const auto centers = kmeans_anchors(wh, 2, 5);
  const bool anchors_ok = centers == std::vector<std::pair<float, float>>{{12.f, 20.f}, {80.f, 64.f}};

  return {nms_ok == 1000 && map_ok && anchors_ok,
          "NMS " + std::to_string(nms_ok) + "/1000 exact; mAP fixtures " + f("%.4f", ap1) + "/" + f("%.4f", ap2) + "/" +
              f("%.4f", ap3) + "; planted anchors " + (anchors_ok ? "recovered" : "missed")};
}

// ------------------------------------------------------------------ 7. EMA

ModelConfig small_input() {
  ModelConfig c = ModelConfig::named("tiny");
  c.height = 64, c.width = 128;
  return c;
}

std::vector<Sample> small_scenes(int n) {
  std::vector<Sample> d;
  for (int i = 0; i < n; ++i) d.push_back(synth_scene(31, i, 64, 128));
  return d;
}

TrainHyper short_run() {
  TrainHyper h;
  h.batch = 2, h.epochs = 4, h.warmup_epochs = 1, h.max_steps = 6;
  return h;
}

Verdict ema() {
  const double p = 0.8125, e0 = -1.5;
  double worst = 0;
  for (double decay : {0.5, 0.9, 0.999, 0.9999}) {
    double e = e0;
    for (int k = 1; k <= 3000; ++k) {
      ema_update<double>({&e, 1}, {&p, 1}, decay);
      worst = std::max(worst, std::fabs(e - (p + (e0 - p) * std::pow(decay, k))));
    }
  }
  const auto data = small_scenes(4);
  const Model m = build(small_input(), 12);
  TrainHyper off = short_run();
  off.use_ema = false;
  const TrainResult a = train(m, data, short_run(), 5), b = train(m, data, off, 5);
  bool identical = a.ema.has_value() && !b.ema.has_value();
  for (size_t i = 0; identical && i < a.model.params.size(); ++i)
    identical = a.model.params.entries()[i].value.vec() == b.model.params.entries()[i].value.vec();
  return {worst <= 1e-12 && identical,
          "closed-form error " + f("%.1e", worst) + "; weights with/without EMA " + (identical ? "bit-identical" : "differ")};
}

// ---------------------------------------------------------- 8. determinism

Verdict determinism() {
  const fs::path dir = scratch("determinism");
  const auto data = small_scenes(4);
  std::string ckpt[2], trace[2];
  for (int i = 0; i < 2; ++i) {
    const TrainResult r = train(build(small_input(), 21), data, short_run(), 8);
    const fs::path c = dir / ("run" + std::to_string(i) + ".ckpt"), t = dir / ("run" + std::to_string(i) + ".csv");
    save_checkpoint(c.string(), r.model, r.ema ? &*r.ema : nullptr);
    write_trace_csv(t.string(), r.trace);
    ckpt[i] = slurp(c), trace[i] = slurp(t);
  }
  synth_generate(4, 17, (dir / "a").string(), 2);
  synth_generate(4, 17, (dir / "b").string(), 2);
  int files = 0, same = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    same += slurp(e.path()) == slurp(dir / "b" / fs::relative(e.path(), dir / "a"));
  }
  fs::remove_all(dir);
  const bool ok = ckpt[0] == ckpt[1] && !ckpt[0].empty() && trace[0] == trace[1] && files > 0 && same == files;
  return {ok, std::string("checkpoints ") + (ckpt[0] == ckpt[1] ? "identical" : "differ") + ", traces " +
                  (trace[0] == trace[1] ? "identical" : "differ") + ", synth files " + std::to_string(same) + "/" +
                  std::to_string(files) + " identical"};
}

// --------------------------------------------------------- 9. quantization

Verdict quantization(const OverfitRun& r) {
  const Model m = r.result.inference_model();
  const EvalReport fp32 = evaluate(m, r.val_set).report;
  const EvalReport fp16 = eval_quantized(m, calibrate(m, r.val_set, 16), r.val_set).report;
  const EvalReport int8 = eval_quantized(m, calibrate(m, r.val_set, 8), r.val_set).report;
  const double d16 = std::max({std::fabs(fp16.recall - fp32.recall), std::fabs(fp16.map50 - fp32.map50),
                               std::fabs(fp16.da_miou - fp32.da_miou), std::fabs(fp16.ll_acc - fp32.ll_acc),
                               std::fabs(fp16.ll_iou - fp32.ll_iou)});
  const double d8 = fp32.da_miou - int8.da_miou;

  std::mt19937_64 rng(5);
  int64_t elements = 0, violations = 0;
  for (int t = 0; t < 200; ++t) {
    std::normal_distribution<float> n(0, std::exp(std::uniform_real_distribution<float>(-5, 5)(rng)));
    Tensor<float> x(Shape{1000});
    double mx = 0;
    for (auto& v : x.vec()) v = n(rng), mx = std::max(mx, double(std::fabs(v)));
    const QParams q{int8_scale(mx), 8};
    const Tensor<float> y = fake_quant(x, q);
    for (int64_t i = 0; i < x.numel(); ++i, ++elements)
      violations += std::fabs(double(x[i]) - double(y[i])) > q.scale / 2 * (1 + 1e-6);
  }
  return {d16 <= 0.001 && d8 <= 0.015 && violations == 0,
          "FP16 max metric delta " + f("%.3f", 100 * d16) + " pts; INT8 da mIoU " + f("%.2f", 100 * fp32.da_miou) +
              " -> " + f("%.2f", 100 * int8.da_miou) + " (" + f("%+.2f", -100 * d8) + " pts); bound held on " +
              std::to_string(elements - violations) + "/" + std::to_string(elements) + " elements"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Verdict& v) {
    std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Verdict()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Verdict{false, std::string("error: ") + e.what()};
    }
  };
  report(1, "cost table", guarded(cost_table));
  report(2, "shape conformance", guarded(shapes));
  report(3, "gradient suite", guarded(gradients));
  report(4, "loss unit values", guarded(loss_values));
  std::optional<OverfitRun> run;
  report(5, "overfit", guarded([&] {
           run = overfit_run();
           return overfit(*run);
         }));
  report(6, "oracle equivalence", guarded(oracles));
  report(7, "EMA closed form", guarded(ema));
  report(8, "determinism", guarded(determinism));
  report(9, "quantization direction", guarded([&] {
           if (!run) return Verdict{false, "no overfit model"};
           return quantization(*run);
         }));
  std::printf("%d/9 criteria passed\n", 9 - failed);
  return failed == 0 ? 0 : 1;
}
