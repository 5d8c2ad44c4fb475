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

#include <cstring>
#include <fstream>
#include <sstream>

#include "tln/model.hpp"

namespace tln {
namespace {

constexpr char kMagic[4] = {'T', 'L', 'N', '1'};

// Little-endian primitives; the format is independent of host byte order.
class Writer {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i64(int64_t v) {
    const auto u = static_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(u >> (8 * i)));
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(const char* p, size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void need(size_t n) const {
    if (pos_ + n > data_.size()) throw TruncatedError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
  int64_t i64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
    return static_cast<int64_t>(v);
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  size_t pos_ = 0;
};

void write_store(Writer& w, const ParamStore& s) {
  w.u32(static_cast<uint32_t>(s.size()));
  for (const auto& e : s.entries()) {
    w.str(e.name);
    w.u32(static_cast<uint32_t>(e.value.rank()));
    for (int64_t d : e.value.shape().dims()) w.i64(d);
    for (float v : e.value.vec()) w.f32(v);
  }
}

// Fills `dst` (already shaped by build) from the next section.
void read_store(Reader& r, ParamStore& dst, const char* section) {
  const uint32_t n = r.u32();
  if (n != dst.size())
    throw ShapeMismatchError(std::string(section) + ": checkpoint has " + std::to_string(n) + " records, model has " +
                             std::to_string(dst.size()));
  for (auto& e : dst.entries()) {
    const std::string name = r.str();
    if (name != e.name) throw ShapeMismatchError(std::string(section) + ": expected record " + e.name + ", found " + name);
    const uint32_t rank = r.u32();
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = r.i64();
    if (dims != e.value.shape().dims())
      throw ShapeMismatchError("record " + name + ": checkpoint shape does not match model shape " +
                               e.value.shape().str());
    for (auto& v : e.value.vec()) v = r.f32();
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, const EmaShadow* ema) {
  Writer w;
  w.raw(kMagic, 4);
  w.str(m.config.descriptor());
  for (const auto& g : m.anchors.groups)
    for (const auto& [aw, ah] : g) w.f32(aw), w.f32(ah);
  write_store(w, m.params);
  write_store(w, m.buffers);
  w.u8(ema ? 1 : 0);
  if (ema) {
    write_store(w, ema->params);
    write_store(w, ema->buffers);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError("failed writing " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError(path + " is not a TLN1 checkpoint");

  const std::string desc = r.str();
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_descriptor(desc);
  } catch (const ParameterError& e) {
    throw ConfigMismatchError(std::string("checkpoint config unreadable: ") + e.what());
  }
  if (expected && !(cfg == *expected))
    throw ConfigMismatchError("checkpoint holds '" + desc + "' but '" + expected->descriptor() + "' was requested");

  LoadedCheckpoint out{build(cfg, 0), std::nullopt};
  for (auto& g : out.model.anchors.groups)
    for (auto& a : g) a.first = r.f32(), a.second = r.f32();
  read_store(r, out.model.params, "parameters");
  read_store(r, out.model.buffers, "buffers");
  const uint8_t has_ema = r.u8();
  if (has_ema > 1) throw CheckpointError("corrupt EMA flag");
  if (has_ema) {
    EmaShadow ema{out.model.params, out.model.buffers};
    read_store(r, ema.params, "ema parameters");
    read_store(r, ema.buffers, "ema buffers");
    out.ema = std::move(ema);
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return out;
}

Model LoadedCheckpoint::inference_model() const {
  Model m = model;
  if (ema) {
    m.params = ema->params;
    m.buffers = ema->buffers;
  }
  return m;
}

}  // namespace tln
