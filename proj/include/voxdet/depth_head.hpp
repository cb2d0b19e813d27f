// Copyright 2026 The voxdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxdet/box_geom.hpp"
#include "voxdet/layers.hpp"

namespace voxdet {

/// x-cell interval [lo, hi) with the tower's kernel size and dilation.
struct PartSpec {
  int lo = 0, hi = 0;
  int kernel = 1;
  int dilation = 1;

  int width() const { return hi - lo; }
  bool covers(int x) const { return x >= lo && x < hi; }
  bool operator==(const PartSpec&) const = default;
};

/// [0, 72), [52, 124), [104, 176) with kernels 1/3/3 and dilations 1/1/2.
std::vector<PartSpec> default_parts();

/// Throws UsageError unless every interval is non-empty, inside [0, width),
/// has an odd kernel, overlaps its successor, and the union covers [0, width).
void validate_parts(std::span<const PartSpec> parts, int width);

std::vector<nn::Tensor> split_parts(const nn::Tensor& r, std::span<const PartSpec> parts);

/// Per-part raw maps. With A anchors per cell: cls (1, A, H, w) logits, box
/// (1, 7A, H, w) with channel a*7+j, dir (1, 2A, H, w) with channel a*2+b.
struct PartMaps {
  nn::Tensor cls, box, dir;
};

inline constexpr double kClassPrior = 0.01;
/// Standard deviation of the 1x1 output-head weights.
inline constexpr double kHeadInitStd = 0.01;

class PartTower {
 public:
  PartTower() = default;
  PartTower(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
            std::int64_t width, const PartSpec& spec, int anchors, nn::BatchNormOptions bn);
  PartMaps operator()(const nn::Tensor& slice, bool train) const;

 private:
  nn::ConvBnRelu conv1_, conv2_;
  nn::Conv2d cls_, box_, dir_;
};

class DepthAwareHead {
 public:
  DepthAwareHead() = default;
  DepthAwareHead(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                 std::int64_t width, std::vector<PartSpec> parts, int anchors, nn::BatchNormOptions bn);
  std::vector<PartMaps> operator()(const nn::Tensor& r, bool train) const;
  const std::vector<PartSpec>& parts() const { return parts_; }

 private:
  std::vector<PartSpec> parts_;
  std::vector<PartTower> towers_;
};

/// Fused per-anchor predictions over the full width, indexed by the anchor
/// ordinal (a * H + y) * W + x.
struct FusedPrediction {
  int anchors = 0, height = 0, width = 0;
  std::vector<double> score;      // max over covering parts of sigmoid(logit)
  std::vector<int> part;          // index of the winning part
  std::vector<Residual> box;      // from the winning part
  std::vector<int> direction;     // arg-max bin of the winning part, ties to 0

  std::size_t size() const { return score.size(); }
};

/// Ties between parts go to the lower part index.
FusedPrediction fuse_scores(std::span<const PartMaps> outputs, std::span<const PartSpec> parts,
                            int width);

}  // namespace voxdet
