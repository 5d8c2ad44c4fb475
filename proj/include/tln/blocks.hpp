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

// Architectural building blocks. Each block declares its parameters through a
// Builder at construction and runs against a Ctx at forward time; parameter
// names are "<block name>.<part>".

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tln/context.hpp"

namespace tln {

/// Static description of one convolution, kept for cost accounting.
struct ConvLayer {
  std::string name;
  int64_t cin = 0, cout = 0, k = 1, stride = 1, pad = 0, dilation = 1, groups = 1;
  bool bias = false;
  bool transposed = false;
  int64_t in_scale = 1;  // input resolution is (H, W) / in_scale

  int64_t weight_count() const { return cin / groups * cout * k * k; }
  int64_t param_count() const { return weight_count() + (bias ? cout : 0); }
  /// Multiply-adds for one image of size h x w (full-resolution pixels).
  int64_t macs(int64_t h, int64_t w) const;
};

class Builder {
 public:
  Builder(ParamStore& params, ParamStore& buffers, uint64_t seed);

  void conv(const ConvLayer& layer);
  void norm(const std::string& prefix, int64_t channels);
  void slope(const std::string& prefix, int64_t channels);

  const std::vector<ConvLayer>& layers() const { return layers_; }
  int64_t norm_channels() const { return norm_channels_; }
  int64_t slope_channels() const { return slope_channels_; }

 private:
  ParamStore& params_;
  ParamStore& buffers_;
  std::mt19937_64 rng_;
  std::vector<ConvLayer> layers_;
  int64_t norm_channels_ = 0;
  int64_t slope_channels_ = 0;
};

struct Conv {
  ConvLayer layer;
  Conv() = default;
  Conv(Builder& b, ConvLayer l);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

/// Batchnorm followed by per-channel PReLU.
struct NormAct {
  std::string name;
  NormAct() = default;
  NormAct(Builder& b, std::string n, int64_t channels);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

struct ConvBNAct {
  std::string name;
  Conv conv;
  NormAct act;
  ConvBNAct() = default;
  ConvBNAct(Builder& b, const std::string& n, int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t in_scale,
            int64_t groups = 1, int64_t dilation = 1);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

/// Depthwise 3x3 followed by pointwise 1x1, each with norm and activation.
struct DsConv {
  ConvBNAct dw, pw;
  DsConv() = default;
  DsConv(Builder& b, const std::string& n, int64_t channels, int64_t stride, int64_t in_scale);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

enum class BlockKind { kDwEsp, kStrideEsp };

struct BlockSpec {
  BlockKind kind = BlockKind::kDwEsp;
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t stride = 1;
  int64_t branch_count = 5;
  std::vector<int64_t> dilation_rates{1, 2, 4, 8, 16};
  int64_t repeats = 1;

  void validate() const;
  /// Reduced width d = out / K; the dilation-1 branch takes the remainder.
  int64_t reduced_width() const { return out_channels / branch_count; }
  std::vector<int64_t> branch_widths() const;
};

/// Hierarchical feature fusion: branch 1 passes through, branches 2..K are
/// replaced by their running sums.
std::vector<Var<float>> hff(const std::vector<Var<float>>& branches);

/// ESP block. kDwEsp: 1x1 reduce, depthwise dilated separable branches,
/// residual add. kStrideEsp: 3x3 stride-2 reduce, dilated 3x3 branches.
struct EspBlock {
  std::string name;
  BlockSpec spec;
  Conv reduce;
  std::vector<Conv> spatial;    // dilated 3x3 (depthwise for kDwEsp)
  std::vector<Conv> pointwise;  // kDwEsp only
  NormAct act;

  EspBlock() = default;
  EspBlock(Builder& b, std::string n, BlockSpec s, int64_t in_scale);
  /// Unfused branch outputs b_1..b_K.
  std::vector<Var<float>> branches(Ctx& ctx, const Var<float>& x) const;
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

struct Spp {
  ConvBNAct reduce, merge;
  std::array<int64_t, 3> kernels{5, 9, 13};
  Spp() = default;
  Spp(Builder& b, const std::string& n, int64_t channels, int64_t in_scale);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
};

struct Pcaa {
  std::string name;
  Conv classes, query;
  ConvBNAct project;
  int64_t patch = 8;
  Pcaa() = default;
  Pcaa(Builder& b, const std::string& n, int64_t cin, int64_t cout, int64_t patch, int64_t in_scale);
  Var<float> operator()(Ctx& ctx, const Var<float>& x) const;
  /// Per-pixel attention weights over the four class centers, (N,4,H,W).
  Tensor<float> attention_weights(Ctx& ctx, const Var<float>& x) const;
};

struct LitePan {
  ConvBNAct lateral3, lateral4, lateral5;
  DsConv top4, top3, down4, fuse4, down5, fuse5;
  LitePan() = default;
  LitePan(Builder& b, const std::string& n, int64_t c3, int64_t c4, int64_t c5, int64_t width);
  std::array<Var<float>, 3> operator()(Ctx& ctx, const Var<float>& c3, const Var<float>& c4,
                                       const Var<float>& c5) const;
};

struct SegHead {
  std::string name;
  Conv up1, up2, up3, out;
  NormAct up1_act, up2_act, up3_act;
  ConvBNAct refine1a, refine1b, refine2a, refine2b;
  SegHead() = default;
  SegHead(Builder& b, const std::string& n, int64_t f, int64_t u1, int64_t u2);
  /// f at 1/8, i2 at 1/4, i1 at 1/2 resolution; returns full-resolution logits.
  Var<float> operator()(Ctx& ctx, const Var<float>& f, const Var<float>& i1, const Var<float>& i2) const;
};

constexpr int64_t kAnchorsPerCell = 3;
constexpr int64_t kNumClasses = 1;
constexpr int64_t kDetChannels = kAnchorsPerCell * (5 + kNumClasses);

struct DetHead {
  std::array<Conv, 3> heads;
  DetHead() = default;
  DetHead(Builder& b, const std::string& n, int64_t width);
  std::array<Var<float>, 3> operator()(Ctx& ctx, const std::array<Var<float>, 3>& p) const;
};

}  // namespace tln
