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

#include "tln/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace tln {

namespace fs = std::filesystem;

// ------------------------------------------------------------ preprocessing

int vehicle_class(const std::string& category) {
  for (const char* c : {"car", "truck", "bus", "train"})
    if (category == c) return 0;
  return -1;
}

Tensor<float> resize_bilinear(const Tensor<float>& image, int64_t height, int64_t width) {
  if (image.rank() != 3 || height < 1 || width < 1) throw ParameterError("resize_bilinear: expected a (C,H,W) image");
  const int64_t c = image.dim(0), ih = image.dim(1), iw = image.dim(2);
  if (ih == height && iw == width) return image;
  Tensor<float> out(Shape{c, height, width});
  const double sy = double(ih) / double(height), sx = double(iw) / double(width);
  for (int64_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(ih - 1));
    const int64_t y0 = static_cast<int64_t>(fy), y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - double(y0);
    for (int64_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(iw - 1));
      const int64_t x0 = static_cast<int64_t>(fx), x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - double(x0);
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* p = image.data() + ch * ih * iw;
        const double top = p[y0 * iw + x0] * (1 - wx) + p[y0 * iw + x1] * wx;
        const double bot = p[y1 * iw + x0] * (1 - wx) + p[y1 * iw + x1] * wx;
        out[(ch * height + y) * width + x] = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Sample preprocess(const RawSample& raw, int64_t height, int64_t width) {
  if (raw.image.rank() != 3 || raw.image.dim(0) != 3) throw DataError(raw.id + ": image must be (3,H,W)");
  const int64_t ih = raw.image.dim(1), iw = raw.image.dim(2);
  if (raw.drivable.height != ih || raw.drivable.width != iw)
    throw DataError(raw.id + ": drivable mask size differs from the image");
  Sample s;
  s.id = raw.id;
  s.image = resize_bilinear(raw.image, height, width);
  for (const RawObject& o : raw.objects) {
    const int cls = vehicle_class(o.category);
    if (cls < 0) continue;
    const float x1 = std::clamp(o.box.x1, 0.f, float(iw)), x2 = std::clamp(o.box.x2, 0.f, float(iw));
    const float y1 = std::clamp(o.box.y1, 0.f, float(ih)), y2 = std::clamp(o.box.y2, 0.f, float(ih));
    if (!(x2 > x1) || !(y2 > y1)) continue;
    s.boxes.push_back({cls, 0.5f * (x1 + x2) / float(iw), 0.5f * (y1 + y2) / float(ih), (x2 - x1) / float(iw),
                       (y2 - y1) / float(ih)});
  }
  s.drivable = Mask(height, width);
  for (int64_t y = 0; y < height; ++y) {
    const int64_t sy = std::min(ih - 1, static_cast<int64_t>((y + 0.5) * double(ih) / double(height)));
    for (int64_t x = 0; x < width; ++x) {
      const int64_t sx = std::min(iw - 1, static_cast<int64_t>((x + 0.5) * double(iw) / double(width)));
      s.drivable.at(y, x) = raw.drivable.at(sy, sx) != 0 ? 1 : 0;
    }
  }
  const float fx = float(width) / float(iw), fy = float(height) / float(ih);
  for (const Polyline& l : raw.lanes) {
    Polyline p;
    for (const auto& [x, y] : l) p.emplace_back(x * fx, y * fy);
    s.lanes.push_back(std::move(p));
  }
  return s;
}

Mask rasterize_lanes(const std::vector<Polyline>& lanes, int width_px, int64_t height, int64_t width) {
  if (width_px < 1) throw ParameterError("rasterize_lanes: stroke width must be positive");
  Mask m(height, width);
  const double r = 0.5 * width_px, r2 = r * r;
  for (const Polyline& l : lanes) {
    for (size_t i = 0; i < l.size(); ++i) {
      const double ax = l[i].first, ay = l[i].second;
      const double bx = i + 1 < l.size() ? l[i + 1].first : ax, by = i + 1 < l.size() ? l[i + 1].second : ay;
      if (i + 1 == l.size() && l.size() > 1) break;
      const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(ax, bx) - r - 1)));
      const int64_t x1 = std::min<int64_t>(width - 1, static_cast<int64_t>(std::ceil(std::max(ax, bx) + r + 1)));
      const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(ay, by) - r - 1)));
      const int64_t y1 = std::min<int64_t>(height - 1, static_cast<int64_t>(std::ceil(std::max(ay, by) + r + 1)));
      const double dx = bx - ax, dy = by - ay, len2 = dx * dx + dy * dy;
      for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          const double t = len2 > 0 ? std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0) : 0.0;
          const double ex = px - (ax + t * dx), ey = py - (ay + t * dy);
          if (ex * ex + ey * ey <= r2) m.at(y, x) = 1;
        }
    }
  }
  return m;
}

// ----------------------------------------------------------------- file IO

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path);
}

// Parses a binary NetPBM header; returns (width, height) and the payload offset.
struct PnmHeader {
  int64_t width = 0, height = 0;
  size_t offset = 0;
};

PnmHeader parse_pnm(const std::string& bytes, const char* magic, const std::string& path) {
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) throw DataError(path + ": expected " + magic + " NetPBM");
  size_t pos = 2;
  int64_t fields[3];
  for (int64_t& f : fields) {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw DataError(path + ": malformed header");
    f = std::stoll(bytes.substr(start, pos - start));
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError(path + ": malformed header");
  if (fields[0] < 1 || fields[1] < 1 || fields[2] != 255) throw DataError(path + ": unsupported dimensions or maxval");
  return {fields[0], fields[1], pos + 1};
}

uint8_t to_byte(float v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)); }

float parse_float(const std::string& tok, const std::string& source) {
  char* end = nullptr;
  const float v = std::strtof(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
    throw DataError(source + ": bad number '" + tok + "'");
  return v;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ParameterError("write_ppm: expected a (3,H,W) image");
  const int64_t h = image.dim(1), w = image.dim(2), plane = h * w;
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const size_t head = bytes.size();
  bytes.resize(head + static_cast<size_t>(3 * plane));
  for (int64_t i = 0; i < plane; ++i)
    for (int64_t c = 0; c < 3; ++c) bytes[head + static_cast<size_t>(3 * i + c)] = static_cast<char>(to_byte(image[c * plane + i]));
  write_file(path, bytes);
}

Tensor<float> read_ppm(const std::string& path) {
  const std::string bytes = read_file(path);
  const PnmHeader h = parse_pnm(bytes, "P6", path);
  const int64_t plane = h.width * h.height;
  if (bytes.size() != h.offset + static_cast<size_t>(3 * plane)) throw DataError(path + ": payload size mismatch");
  Tensor<float> t(Shape{3, h.height, h.width});
  for (int64_t i = 0; i < plane; ++i)
    for (int64_t c = 0; c < 3; ++c)
      t[c * plane + i] = static_cast<float>(static_cast<uint8_t>(bytes[h.offset + static_cast<size_t>(3 * i + c)])) / 255.f;
  return t;
}

void write_pgm(const std::string& path, const Mask& m) {
  std::string bytes = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  for (uint8_t v : m.data) bytes.push_back(static_cast<char>(v ? 255 : 0));
  write_file(path, bytes);
}

Mask read_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  const PnmHeader h = parse_pnm(bytes, "P5", path);
  if (bytes.size() != h.offset + static_cast<size_t>(h.width * h.height)) throw DataError(path + ": payload size mismatch");
  Mask m(h.height, h.width);
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<uint8_t>(bytes[h.offset + i]) > 127 ? 1 : 0;
  return m;
}

std::string format_boxes(const std::vector<NormBox>& boxes) {
  std::string out;
  char buf[128];
  for (const NormBox& b : boxes) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx, b.cy, b.w, b.h);
    out += buf;
  }
  return out;
}

std::vector<NormBox> parse_boxes(const std::string& text, const std::string& source) {
  std::vector<NormBox> out;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (tok.size() != 5) throw DataError(where + ": expected 'class cx cy w h'");
    NormBox b;
    try {
      size_t used = 0;
      b.class_id = std::stoi(tok[0], &used);
      if (used != tok[0].size()) throw std::invalid_argument("class");
    } catch (const std::exception&) {
      throw DataError(where + ": bad class id '" + tok[0] + "'");
    }
    b.cx = parse_float(tok[1], where), b.cy = parse_float(tok[2], where);
    b.w = parse_float(tok[3], where), b.h = parse_float(tok[4], where);
    for (float v : {b.cx, b.cy, b.w, b.h})
      if (v < 0.f || v > 1.f) throw DataError(where + ": box coordinates must lie in [0, 1]");
    out.push_back(b);
  }
  return out;
}

std::string format_lanes(const std::vector<Polyline>& lanes) {
  std::string out;
  char buf[64];
  for (const Polyline& l : lanes) {
    for (size_t i = 0; i < l.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", i ? " " : "", l[i].first, l[i].second);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<Polyline> parse_lanes(const std::string& text, const std::string& source) {
  std::vector<Polyline> out;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream ls(line);
    Polyline p;
    const std::string where = source + ":" + std::to_string(lineno);
    for (std::string t; ls >> t;) {
      const size_t comma = t.find(',');
      if (comma == std::string::npos) throw DataError(where + ": expected 'x,y' points");
      p.emplace_back(parse_float(t.substr(0, comma), where), parse_float(t.substr(comma + 1), where));
    }
    if (!p.empty()) out.push_back(std::move(p));
  }
  return out;
}

// ------------------------------------------------------------------ dataset

DatasetManifest DatasetManifest::load(const std::string& root, const std::string& split) {
  DatasetManifest m{root, split, {}};
  std::istringstream in(read_file((fs::path(root) / (split + ".list")).string()));
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) m.ids.push_back(line);
  }
  std::sort(m.ids.begin(), m.ids.end());
  return m;
}

Sample DatasetManifest::load_sample(size_t index) const {
  const std::string& id = ids.at(index);
  const fs::path r(root);
  try {
    Sample s;
    s.id = id;
    s.image = read_ppm((r / "images" / (id + ".ppm")).string());
    const std::string boxes = (r / "boxes" / (id + ".txt")).string();
    s.boxes = parse_boxes(read_file(boxes), boxes);
    s.drivable = read_pgm((r / "da" / (id + ".pgm")).string());
    const std::string lanes = (r / "lanes" / (id + ".txt")).string();
    s.lanes = parse_lanes(read_file(lanes), lanes);
    if (s.drivable.height != s.image.dim(1) || s.drivable.width != s.image.dim(2))
      throw DataError("drivable mask size differs from the image");
    return s;
  } catch (const DataError& e) {
    throw DataError("sample '" + id + "': " + e.what());
  }
}

void save_sample(const std::string& root, const Sample& s) {
  const fs::path r(root);
  for (const char* d : {"images", "boxes", "da", "lanes"}) fs::create_directories(r / d);
  write_ppm((r / "images" / (s.id + ".ppm")).string(), s.image);
  write_file((r / "boxes" / (s.id + ".txt")).string(), format_boxes(s.boxes));
  write_pgm((r / "da" / (s.id + ".pgm")).string(), s.drivable);
  write_file((r / "lanes" / (s.id + ".txt")).string(), format_lanes(s.lanes));
}

// ---------------------------------------------------------------- synthetic

namespace {

// Value after a write/read cycle through the text formats.
float text_round(float v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return std::strtof(buf, nullptr);
}

bool inside_trapezoid(double x, double y, const std::array<Point, 4>& q) {
  // Convex polygon, vertices in order; inside when left of every edge.
  double sign = 0;
  for (int i = 0; i < 4; ++i) {
    const auto [ax, ay] = q[i];
    const auto [bx, by] = q[(i + 1) % 4];
    const double c = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
    if (c == 0) continue;
    if (sign == 0) sign = c;
    else if ((c > 0) != (sign > 0)) return false;
  }
  return true;
}

}  // namespace

Sample synth_scene(uint64_t seed, int64_t index, int64_t height, int64_t width) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(index),
                    static_cast<uint32_t>(static_cast<uint64_t>(index) >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double H = double(height), W = double(width);

  const double horizon = H * uni(0.35, 0.45), vx = W * uni(0.4, 0.6), half_top = W * 0.02;
  const double xl = W * uni(-0.1, 0.15), xr = W * uni(0.85, 1.1);
  const std::array<Point, 4> road{Point{float(xl), float(H)}, Point{float(xr), float(H)},
                                  Point{float(vx + half_top), float(horizon)}, Point{float(vx - half_top), float(horizon)}};
  const double road_tone = uni(0.3, 0.45), grass_tone = uni(0.25, 0.4);

  Sample s;
  char name[32];
  std::snprintf(name, sizeof name, "scene_%06lld", static_cast<long long>(index));
  s.id = name;
  s.image = Tensor<float>(Shape{3, height, width});
  s.drivable = Mask(height, width);
  const int64_t plane = height * width;
  auto paint = [&](int64_t y, int64_t x, double r, double g, double b) {
    s.image[y * width + x] = float(r), s.image[plane + y * width + x] = float(g), s.image[2 * plane + y * width + x] = float(b);
  };
  std::uniform_real_distribution<double> noise(-0.03, 0.03);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) {
      const double n = noise(rng);
      if (y + 0.5 < horizon) {
        const double t = (y + 0.5) / horizon;
        paint(y, x, 0.45 + 0.2 * t + n, 0.6 + 0.2 * t + n, 0.9 + n);
      } else if (inside_trapezoid(x + 0.5, y + 0.5, road)) {
        s.drivable.at(y, x) = 1;
        paint(y, x, road_tone + n, road_tone + n, road_tone + 0.02 + n);
      } else {
        paint(y, x, 0.2 + n, grass_tone + 0.2 + n, 0.15 + n);
      }
    }

  // Lanes converge toward the vanishing point and stop short of the horizon.
  const int lanes = 2 + static_cast<int>(rng() % 3);
  const double stop_y = horizon + 0.15 * (H - horizon);
  for (int i = 0; i < lanes; ++i) {
    const double f = (i + 0.5) / lanes + uni(-0.05, 0.05);
    const double bx = xl + f * (xr - xl), tx = (vx - half_top) + f * 2 * half_top;
    const double t = (H - stop_y) / (H - horizon);
    const double ex = bx + (tx - bx) * t, mx = 0.5 * (bx + ex) + uni(-0.01, 0.01) * W;
    Polyline p{{float(bx), float(H - 1)}, {float(mx), float(0.5 * (H - 1 + stop_y))}, {float(ex), float(stop_y)}};
    for (auto& [x, y] : p) x = text_round(x, "%.3f"), y = text_round(y, "%.3f");
    s.lanes.push_back(std::move(p));
  }
  const int paint_width = std::max(2, static_cast<int>(std::lround(kTrainLaneWidth * W / double(kInputWidth))));
  const Mask lane_paint = rasterize_lanes(s.lanes, paint_width, height, width);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x)
      if (lane_paint.at(y, x)) {
        const double n = noise(rng);
        paint(y, x, 0.92 + n, 0.92 + n, 0.85 + n);
      }

  // Vehicles stand on the road, larger when nearer; far ones drawn first.
  const int vehicles = 1 + static_cast<int>(rng() % 5);
  std::vector<std::array<double, 3>> placed;  // bottom y, center x, width
  for (int i = 0; i < vehicles; ++i) {
    const double yb = uni(horizon + 0.3 * (H - horizon), H - 1);
    const double depth = (yb - horizon) / (H - horizon);
    const double left = xl + (vx - half_top - xl) * (1 - depth), right = xr + (vx + half_top - xr) * (1 - depth);
    const double vw = std::max(12.0, W * uni(0.18, 0.3) * depth);
    const double lo = left + 0.5 * vw, hi = right - 0.5 * vw;
    if (!(hi > lo)) continue;
    placed.push_back({yb, uni(lo, hi), vw});
  }
  std::sort(placed.begin(), placed.end());
  const double palette[][3] = {{0.75, 0.1, 0.1}, {0.1, 0.2, 0.7}, {0.1, 0.1, 0.1}, {0.9, 0.8, 0.1}, {0.85, 0.85, 0.9}};
  for (const auto& [yb, cx, vw] : placed) {
    const int64_t x0 = std::clamp<int64_t>(std::lround(cx - 0.5 * vw), 0, width - 1);
    const int64_t x1 = std::clamp<int64_t>(std::lround(cx + 0.5 * vw), x0 + 1, width);
    const int64_t y1 = std::clamp<int64_t>(std::lround(yb), 1, height);
    const int64_t y0 = std::clamp<int64_t>(std::lround(yb - vw * uni(0.65, 0.9)), 0, y1 - 1);
    const double* col = palette[rng() % 5];
    for (int64_t y = y0; y < y1; ++y)
      for (int64_t x = x0; x < x1; ++x) {
        // Darker window band in the upper third.
        const bool window = y < y0 + (y1 - y0) / 3 && x > x0 + (x1 - x0) / 6 && x < x1 - (x1 - x0) / 6;
        const double k = window ? 0.35 : 1.0;
        paint(y, x, col[0] * k, col[1] * k, col[2] * k);
      }
    NormBox b{0, float(0.5 * (x0 + x1) / W), float(0.5 * (y0 + y1) / H), float((x1 - x0) / W), float((y1 - y0) / H)};
    b.cx = text_round(b.cx, "%.6f"), b.cy = text_round(b.cy, "%.6f");
    b.w = text_round(b.w, "%.6f"), b.h = text_round(b.h, "%.6f");
    s.boxes.push_back(b);
  }
  for (auto& v : s.image.vec()) v = float(to_byte(v)) / 255.f;
  return s;
}

DatasetManifest synth_generate(int64_t n, uint64_t seed, const std::string& out_dir, int64_t n_val, int64_t height,
                               int64_t width) {
  if (n < 1 || n_val < 0) throw ParameterError("synth_generate: need at least one training scene");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());
  std::string train, val;
  for (int64_t i = 0; i < n + n_val; ++i) {
    const Sample s = synth_scene(seed, i, height, width);
    save_sample(out_dir, s);
    (i < n ? train : val) += s.id + "\n";
  }
  write_file((fs::path(out_dir) / "train.list").string(), train);
  write_file((fs::path(out_dir) / "val.list").string(), val);
  return DatasetManifest::load(out_dir, "train");
}

// ---------------------------------------------------------------- batching

Batch make_batch(const std::vector<const Sample*>& samples, int lane_width) {
  if (samples.empty()) throw ParameterError("make_batch: empty batch");
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t h = samples[0]->image.dim(1), w = samples[0]->image.dim(2), plane = h * w;
  Batch b;
  b.images = Tensor<float>(Shape{n, 3, h, w});
  b.drivable = Tensor<float>(Shape{n, 1, h, w});
  b.lanes = Tensor<float>(Shape{n, 1, h, w});
  for (int64_t i = 0; i < n; ++i) {
    const Sample& s = *samples[static_cast<size_t>(i)];
    if (s.image.shape() != Shape{3, h, w} || s.drivable.height != h || s.drivable.width != w)
      throw ParameterError("make_batch: samples differ in size");
    std::copy(s.image.vec().begin(), s.image.vec().end(), b.images.data() + i * 3 * plane);
    const Mask lanes = rasterize_lanes(s.lanes, lane_width, h, w);
    for (int64_t q = 0; q < plane; ++q) {
      b.drivable[i * plane + q] = s.drivable.data[static_cast<size_t>(q)];
      b.lanes[i * plane + q] = lanes.data[static_cast<size_t>(q)];
    }
    std::vector<GtBox> gt;
    for (const NormBox& nb : s.boxes)
      gt.push_back({nb.class_id, box_from_center(nb.cx * float(w), nb.cy * float(h), nb.w * float(w), nb.h * float(h))});
    b.gt.push_back(std::move(gt));
  }
  return b;
}

}  // namespace tln
