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

#include "tln/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <thread>

#include "tln/evaluate.hpp"
#include "tln/gradcheck.hpp"
#include "tln/quant.hpp"
#include "tln/train.hpp"

namespace tln {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kConfigs{"tiny", "small", "base"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// "WxH" -> (height, width).
std::pair<int64_t, int64_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    size_t used = 0;
    const int64_t w = std::stoll(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const int64_t h = std::stoll(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || w <= 0 || h <= 0) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--size expects WxH, got '" + s + "'");
  }
}

ModelConfig config_for(const std::string& name, const std::string& size) {
  ModelConfig c = ModelConfig::named(name);
  if (!size.empty()) std::tie(c.height, c.width) = parse_size(size);
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  return c;
}

int thread_cap() {
  const char* env = std::getenv("TLN_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw UsageError(std::string("TLN_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(n);
}

std::vector<Sample> load_split(const std::string& root, const std::string& split) {
  const DatasetManifest m = DatasetManifest::load(root, split);
  std::vector<Sample> out;
  for (size_t i = 0; i < m.size(); ++i) out.push_back(m.load_sample(i));
  if (out.empty()) throw DataError(root + "/" + split + ".list lists no samples");
  return out;
}

std::vector<Sample> load_eval_split(const std::string& root) {
  return fs::exists(fs::path(root) / "val.list") ? load_split(root, "val") : load_split(root, "train");
}

Model load_for_inference(const std::string& path) { return load_checkpoint(path).inference_model(); }

void log_config(std::ostream& err, const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv) {
  err << "tln " << cmd;
  for (const auto& [k, v] : kv) err << ' ' << k << '=' << v;
  err << '\n';
}

// ----------------------------------------------------------------- commands

void cmd_summary(std::ostream& out, std::ostream& err, const std::string& name, const std::string& size) {
  const ModelConfig cfg = config_for(name, size);
  log_config(err, "summary", {{"config", name}, {"size", std::to_string(cfg.width) + "x" + std::to_string(cfg.height)}});
  const Model m = build(cfg, 0);
  out << "params " << count_params(m) << '\n';
  out << "flops " << count_flops(m, cfg.height, cfg.width) << '\n';
  for (const auto& [mod, f] : flops_by_module(m, cfg.height, cfg.width)) out << "flops." << mod << ' ' << f << '\n';
  for (const auto& [feat, s] : shape_table(m)) out << "shape " << feat << ' ' << s.str() << '\n';
  err << "params " << fmt("%.3fM", count_params(m) / 1e6) << ", MACs "
      << fmt("%.3fG", count_flops(m, cfg.height, cfg.width) / 1e9) << '\n';
}

int cmd_gradcheck(std::ostream& out, std::ostream& err, int geometries, uint64_t seed) {
  log_config(err, "gradcheck", {{"geometries", std::to_string(geometries)}, {"seed", std::to_string(seed)}});
  bool ok = true;
  for (const auto& r : run_gradient_suite(geometries, seed)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.op << " geometries=" << r.geometries
        << " max_rel_error=" << fmt("%.3e", r.max_rel_error) << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

void cmd_synth(std::ostream& out, std::ostream& err, const std::string& dir, int64_t n, int64_t n_val, uint64_t seed,
               const std::string& size) {
  const auto [h, w] = size.empty() ? std::pair<int64_t, int64_t>{kInputHeight, kInputWidth} : parse_size(size);
  log_config(err, "synth", {{"out", dir}, {"n", std::to_string(n)}, {"val", std::to_string(n_val)},
                            {"seed", std::to_string(seed)}});
  if (n < 1 || n_val < 0) throw UsageError("--n must be positive and --val non-negative");
  synth_generate(n, seed, dir, n_val, h, w);
  out << "wrote " << n << " training and " << n_val << " validation scenes to " << dir << '\n';
}

struct TrainArgs {
  std::string config = "tiny", data, out, trace;
  int64_t steps = 300, batch = 2, warmup_epochs = 3;
  uint64_t seed = 1;
  double lr = 0;
  bool no_pcaa = false, no_litepan = false, no_spp = false, no_ema = false;
};

void cmd_train(std::ostream& out, std::ostream& err, const TrainArgs& a) {
  const std::vector<Sample> data = load_split(a.data, "train");
  ModelConfig cfg = ModelConfig::named(a.config);
  cfg.height = data[0].image.dim(1), cfg.width = data[0].image.dim(2);
  cfg.features = {!a.no_pcaa, !a.no_litepan, !a.no_spp};
  TrainHyper h;
  h.max_steps = a.steps;
  h.batch = a.batch;
  h.use_ema = !a.no_ema;
  if (a.lr > 0) h.lr0 = a.lr;
  if (a.steps < 1 || a.batch < 1) throw UsageError("--steps and --batch must be positive");
  const int64_t n = static_cast<int64_t>(data.size()), spe = n / std::min(a.batch, n);
  h.warmup_epochs = a.warmup_epochs;
  h.epochs = std::max((a.steps + spe - 1) / spe, a.warmup_epochs + 1);
  try {
    h.validate(spe);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  const std::string trace = a.trace.empty() ? a.out + ".trace.csv" : a.trace;
  log_config(err, "train", {{"config", a.config},
                            {"data", a.data},
                            {"samples", std::to_string(data.size())},
                            {"steps", std::to_string(a.steps)},
                            {"batch", std::to_string(a.batch)},
                            {"lr0", fmt("%g", h.lr0)},
                            {"warmup_epochs", std::to_string(h.warmup_epochs)},
                            {"seed", std::to_string(a.seed)},
                            {"pcaa", cfg.features.use_pcaa ? "on" : "off"},
                            {"litepan", cfg.features.use_litepan ? "on" : "off"},
                            {"spp", cfg.features.use_spp ? "on" : "off"},
                            {"ema", h.use_ema ? "on" : "off"},
                            {"out", a.out},
                            {"trace", trace}});
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(build(cfg, a.seed), data, h, a.seed, [&](const TraceRow& row) {
    if (row.step % 10 == 0 || row.step + 1 == a.steps) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      err << "step " << row.step << " lr " << fmt("%.3e", row.lr) << " loss " << fmt("%.5f", row.loss.total) << " ("
          << fmt("%.1fs", s) << ")\n";
    }
  });
  save_checkpoint(a.out, r.model, r.ema ? &*r.ema : nullptr);
  write_trace_csv(trace, r.trace);
  out << "first_loss " << fmt("%.6f", r.trace.front().loss.total) << '\n';
  out << "final_loss " << fmt("%.6f", r.trace.back().loss.total) << '\n';
  out << "checkpoint " << a.out << '\n';
}

Mask labels_to_mask(const std::vector<uint8_t>& labels, int64_t h, int64_t w, int64_t out_h, int64_t out_w) {
  Mask m(out_h, out_w);
  for (int64_t y = 0; y < out_h; ++y) {
    const int64_t sy = std::min(h - 1, static_cast<int64_t>((y + 0.5) * h / out_h));
    for (int64_t x = 0; x < out_w; ++x) {
      const int64_t sx = std::min(w - 1, static_cast<int64_t>((x + 0.5) * w / out_w));
      m.at(y, x) = labels[static_cast<size_t>(sy * w + sx)];
    }
  }
  return m;
}

void cmd_infer(std::ostream& out, std::ostream& err, const std::string& ckpt, const std::string& image_path,
               const std::string& out_dir, float conf, float nms_iou) {
  log_config(err, "infer", {{"ckpt", ckpt}, {"image", image_path}, {"out", out_dir}, {"conf", fmt("%g", conf)},
                            {"nms", fmt("%g", nms_iou)}});
  const Model m = load_for_inference(ckpt);
  const Tensor<float> raw = read_ppm(image_path);
  const int64_t h0 = raw.dim(1), w0 = raw.dim(2), h = m.config.height, w = m.config.width;
  const Tensor<float> img = resize_bilinear(raw, h, w).reshaped(Shape{1, 3, h, w});
  const ModelOutput o = infer(m, img);
  const std::array<Tensor<float>, 3> det{o.det[0].value(), o.det[1].value(), o.det[2].value()};
  const float sx = static_cast<float>(w0) / static_cast<float>(w), sy = static_cast<float>(h0) / static_cast<float>(h);
  fs::create_directories(out_dir);
  std::ofstream txt(fs::path(out_dir) / "detections.txt");
  auto dets = nms(decode(det, 0, m.anchors, conf), nms_iou);
  for (auto& d : dets) {
    d.box = {d.box.x1 * sx, d.box.y1 * sy, d.box.x2 * sx, d.box.y2 * sy};
    txt << format_detection(d) << '\n';
  }
  write_pgm((fs::path(out_dir) / "drivable.pgm").string(), labels_to_mask(argmax_labels(o.da.value(), 0), h, w, h0, w0));
  write_pgm((fs::path(out_dir) / "lanes.pgm").string(), labels_to_mask(argmax_labels(o.ll.value(), 0), h, w, h0, w0));
  out << "detections " << dets.size() << '\n';
}

void cmd_eval(std::ostream& out, std::ostream& err, const std::string& ckpt, const std::string& data) {
  log_config(err, "eval", {{"ckpt", ckpt}, {"data", data}});
  const Model m = load_for_inference(ckpt);
  out << evaluate(m, load_eval_split(data)).report.key_values();
}

void cmd_quant(std::ostream& out, std::ostream& err, const std::string& ckpt, const std::string& calib, int bits,
               const std::string& data, const std::string& qmap_out) {
  log_config(err, "quant", {{"ckpt", ckpt}, {"calib", calib}, {"bits", std::to_string(bits)},
                            {"data", data.empty() ? calib : data}});
  const Model m = load_for_inference(ckpt);
  const std::vector<Sample> cal = load_eval_split(calib);
  const std::vector<Sample> eval_set = data.empty() ? cal : load_eval_split(data);
  const QMap q = calibrate(m, cal, bits);
  if (!qmap_out.empty()) {
    std::ofstream f(qmap_out);
    f << q.to_text();
    if (!f) throw std::runtime_error("cannot write " + qmap_out);
  }
  out << "precision," << EvalReport::csv_header() << '\n';
  out << "fp32," << evaluate(m, eval_set).report.csv_row() << '\n';
  out << (bits == 8 ? "int8," : "fp16,") << eval_quantized(m, q, eval_set).report.csv_row() << '\n';
}

void cmd_bench(std::ostream& out, std::ostream& err, const std::string& name, int64_t batch, int iters,
               const std::string& size) {
  const ModelConfig cfg = config_for(name, size);
  const int threads = std::min(thread_cap(), std::max(1, iters));
  log_config(err, "bench", {{"config", name}, {"batch", std::to_string(batch)}, {"iters", std::to_string(iters)},
                            {"threads", std::to_string(threads)}});
  if (batch < 1 || iters < 1) throw UsageError("--batch and --iters must be positive");
  const Model m = build(cfg, 0);
  Tensor<float> img(Shape{batch, 3, cfg.height, cfg.width});
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : img.vec()) v = u(rng);
  infer(m, img);  // warm-up
  std::vector<double> secs(static_cast<size_t>(iters));
  const auto wall0 = std::chrono::steady_clock::now();
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < iters; i += threads) {
        const auto t0 = std::chrono::steady_clock::now();
        infer(m, img);
        secs[static_cast<size_t>(i)] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    });
  for (auto& th : pool) th.join();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  std::vector<double> sorted = secs;
  std::sort(sorted.begin(), sorted.end());
  double mean = 0;
  for (double s : secs) mean += s / iters;
  out << "forward_mean_ms " << fmt("%.3f", mean * 1e3) << '\n';
  out << "forward_median_ms " << fmt("%.3f", sorted[sorted.size() / 2] * 1e3) << '\n';
  out << "forward_min_ms " << fmt("%.3f", sorted.front() * 1e3) << '\n';
  out << "images_per_second " << fmt("%.3f", batch * iters / wall) << '\n';
  err << "wall-clock on this machine only; not comparable with published FPS figures\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TriLiteNet multi-task perception: build, train, evaluate, quantize", "tln"};
  app.require_subcommand(1);

  std::string config = "tiny", size;
  auto* summary = app.add_subcommand("summary", "Parameters, per-module FLOPs and feature shapes");
  summary->add_option("--config", config)->check(CLI::IsMember(kConfigs))->required();
  summary->add_option("--size", size, "Input as WxH (default 640x384)");

  int geometries = 20;
  uint64_t seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite at 64-bit");
  gradcheck->add_option("--geometries", geometries)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", seed);

  std::string out_dir;
  int64_t n = 0, n_val = 0;
  auto* synth = app.add_subcommand("synth", "Write a synthetic road-scene dataset");
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--n", n)->required();
  synth->add_option("--val", n_val, "Validation scenes");
  synth->add_option("--seed", seed);
  synth->add_option("--size", size, "Scene size as WxH (default 640x384)");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train on DIR/train.list");
  trn->add_option("--config", ta.config)->check(CLI::IsMember(kConfigs));
  trn->add_option("--data", ta.data)->required();
  trn->add_option("--steps", ta.steps);
  trn->add_option("--batch", ta.batch);
  trn->add_option("--lr", ta.lr, "Peak learning rate (default 1e-3)");
  trn->add_option("--warmup-epochs", ta.warmup_epochs);
  trn->add_option("--seed", ta.seed);
  trn->add_option("--out", ta.out)->required();
  trn->add_option("--trace", ta.trace, "Loss trace CSV (default OUT.trace.csv)");
  trn->add_flag("--no-pcaa", ta.no_pcaa);
  trn->add_flag("--no-litepan", ta.no_litepan);
  trn->add_flag("--no-spp", ta.no_spp);
  trn->add_flag("--no-ema", ta.no_ema);

  std::string ckpt, image, data, qmap_out;
  float conf = kInferConfThreshold, nms_iou = kNmsIou;
  auto* inf = app.add_subcommand("infer", "Detections and masks for one PPM image");
  inf->add_option("--ckpt", ckpt)->required();
  inf->add_option("--image", image)->required();
  inf->add_option("--out", out_dir)->required();
  inf->add_option("--conf", conf)->check(CLI::Range(0.0, 1.0));
  inf->add_option("--nms", nms_iou)->check(CLI::Range(0.0, 1.0));

  auto* ev = app.add_subcommand("eval", "Metrics on DIR/val.list (or train.list)");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--data", data)->required();

  int bits = 8;
  std::string calib;
  auto* quant = app.add_subcommand("quant", "Post-training quantization and evaluation");
  quant->add_option("--ckpt", ckpt)->required();
  quant->add_option("--calib", calib)->required();
  quant->add_option("--bits", bits)->check(CLI::IsMember({8, 16}))->required();
  quant->add_option("--data", data, "Evaluation set (default: the calibration set)");
  quant->add_option("--qmap", qmap_out, "Write the calibrated map here");

  int64_t batch = 1;
  int iters = 10;
  auto* bench = app.add_subcommand("bench", "Wall-clock forward-pass statistics");
  bench->add_option("--config", config)->check(CLI::IsMember(kConfigs))->required();
  bench->add_option("--batch", batch);
  bench->add_option("--iters", iters);
  bench->add_option("--size", size);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*summary) cmd_summary(out, err, config, size);
    else if (*gradcheck) return cmd_gradcheck(out, err, geometries, seed);
    else if (*synth) cmd_synth(out, err, out_dir, n, n_val, seed, size);
    else if (*trn) cmd_train(out, err, ta);
    else if (*inf) cmd_infer(out, err, ckpt, image, out_dir, conf, nms_iou);
    else if (*ev) cmd_eval(out, err, ckpt, data);
    else if (*quant) cmd_quant(out, err, ckpt, calib, bits, data, qmap_out);
    else if (*bench) cmd_bench(out, err, config, batch, iters, size);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace tln
