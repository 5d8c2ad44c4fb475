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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tln/detection.hpp"

namespace tln {

/// Malformed or unreadable dataset artifact; the message names the file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Point = std::pair<float, float>;  // (x, y) px
using Polyline = std::vector<Point>;

/// Normalized center-form box.
struct NormBox {
  int class_id = 0;
  float cx = 0, cy = 0, w = 0, h = 0;
  bool operator==(const NormBox&) const = default;
};

/// Single-channel 8-bit map in row-major order.
struct Mask {
  int64_t height = 0, width = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int64_t h, int64_t w) : height(h), width(w), data(static_cast<size_t>(h * w), 0) {}
  uint8_t& at(int64_t y, int64_t x) { return data[static_cast<size_t>(y * width + x)]; }
  uint8_t at(int64_t y, int64_t x) const { return data[static_cast<size_t>(y * width + x)]; }
  bool operator==(const Mask&) const = default;
};

struct Sample {
  std::string id;
  Tensor<float> image;  // (3, H, W) in [0, 1]
  std::vector<NormBox> boxes;
  Mask drivable;  // {0, 1}
  std::vector<Polyline> lanes;
};

// ------------------------------------------------------------ preprocessing

inline constexpr int64_t kInputHeight = 384, kInputWidth = 640;
inline constexpr int kTrainLaneWidth = 8, kValLaneWidth = 2;

struct RawObject {
  std::string category;
  Box box;  // px in the raw image
};

/// A sample before resizing and label merging. Drivable sub-classes are
/// 0 (none), 1 (direct), 2 (alternative).
struct RawSample {
  std::string id;
  Tensor<float> image;  // (3, H, W)
  std::vector<RawObject> objects;
  Mask drivable;
  std::vector<Polyline> lanes;
};

/// car, truck, bus and train map to vehicle (0); anything else is dropped.
int vehicle_class(const std::string& category);

/// Bilinear resize with half-pixel centers of a (C, H, W) image.
Tensor<float> resize_bilinear(const Tensor<float>& image, int64_t height, int64_t width);

/// Resizes to height x width, merges classes and drivable sub-classes, and
/// rescales lane geometry.
Sample preprocess(const RawSample& raw, int64_t height = kInputHeight, int64_t width = kInputWidth);

/// Every pixel whose center lies within width/2 of some segment.
Mask rasterize_lanes(const std::vector<Polyline>& lanes, int width_px, int64_t height, int64_t width);

// ----------------------------------------------------------------- file IO

void write_ppm(const std::string& path, const Tensor<float>& image);
Tensor<float> read_ppm(const std::string& path);
/// Binary masks are stored as {0, 255}.
void write_pgm(const std::string& path, const Mask& mask);
Mask read_pgm(const std::string& path);
std::string format_boxes(const std::vector<NormBox>& boxes);
std::vector<NormBox> parse_boxes(const std::string& text, const std::string& source = "<boxes>");
std::string format_lanes(const std::vector<Polyline>& lanes);
std::vector<Polyline> parse_lanes(const std::string& text, const std::string& source = "<lanes>");

struct DatasetManifest {
  std::string root;
  std::string split;
  std::vector<std::string> ids;  // sorted

  /// Reads root/<split>.list.
  static DatasetManifest load(const std::string& root, const std::string& split);
  Sample load_sample(size_t index) const;
  size_t size() const { return ids.size(); }
};

void save_sample(const std::string& root, const Sample& s);

/// Writes n training and n_val validation scenes plus both split lists.
DatasetManifest synth_generate(int64_t n, uint64_t seed, const std::string& out_dir, int64_t n_val = 0,
                               int64_t height = kInputHeight, int64_t width = kInputWidth);

/// Scene `index` of the generator stream, without touching the disk.
Sample synth_scene(uint64_t seed, int64_t index, int64_t height = kInputHeight, int64_t width = kInputWidth);

// ---------------------------------------------------------------- batching

struct Batch {
  Tensor<float> images;                // (N, 3, H, W)
  std::vector<std::vector<GtBox>> gt;  // px
  Tensor<float> drivable;              // (N, 1, H, W)
  Tensor<float> lanes;                 // (N, 1, H, W)
};

Batch make_batch(const std::vector<const Sample*>& samples, int lane_width);

}  // namespace tln
