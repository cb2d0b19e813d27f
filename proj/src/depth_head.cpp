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

#include "voxdet/depth_head.hpp"

#include <cmath>

namespace voxdet {

std::vector<PartSpec> default_parts() { return {{0, 72, 1, 1}, {52, 124, 3, 1}, {104, 176, 3, 2}}; }

void validate_parts(std::span<const PartSpec> parts, int width) {
  if (parts.empty()) throw UsageError("head needs at least one part");
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const PartSpec& s = parts[p];
    const std::string id = "part " + std::to_string(p + 1);
    if (s.lo < 0 || s.hi > width || s.hi <= s.lo)
      throw UsageError(id + " interval [" + std::to_string(s.lo) + ", " + std::to_string(s.hi) +
                       ") is not inside [0, " + std::to_string(width) + ")");
    if (s.kernel < 1 || s.kernel % 2 == 0 || s.dilation < 1)
      throw UsageError(id + " needs an odd kernel and dilation >= 1");
    if (p > 0 && !(s.lo < parts[p - 1].hi && s.lo > parts[p - 1].lo))
      throw UsageError(id + " must start inside the previous part");
  }
  if (parts.front().lo != 0 || parts.back().hi != width)
    throw UsageError("parts do not cover [0, " + std::to_string(width) + ")");
}

std::vector<nn::Tensor> split_parts(const nn::Tensor& r, std::span<const PartSpec> parts) {
  std::vector<nn::Tensor> out;
  out.reserve(parts.size());
  for (const PartSpec& p : parts) {
    if (p.lo < 0 || p.hi > r.dim(3) || p.hi <= p.lo) throw UsageError("split_parts: interval out of bounds");
    out.push_back(nn::slice_width(r, p.lo, p.hi));
  }
  return out;
}

PartTower::PartTower(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                     std::int64_t width, const PartSpec& spec, int anchors, nn::BatchNormOptions bn) {
  const nn::Conv2dGeometry g{1, spec.dilation * (spec.kernel - 1) / 2, spec.dilation};
  conv1_ = nn::ConvBnRelu(store, name + ".conv1", in_channels, width, spec.kernel, g, bn);
  conv2_ = nn::ConvBnRelu(store, name + ".conv2", width, width, spec.kernel, g, bn);
  cls_ = nn::Conv2d(store, name + ".cls", width, anchors, 1, {1, 0, 1}, true, kHeadInitStd);
  box_ = nn::Conv2d(store, name + ".box", width, 7 * anchors, 1, {1, 0, 1}, true, kHeadInitStd);
  dir_ = nn::Conv2d(store, name + ".dir", width, 2 * anchors, 1, {1, 0, 1}, true, kHeadInitStd);
  for (double& b : cls_.bias().data()) b = -std::log((1 - kClassPrior) / kClassPrior);
}

PartMaps PartTower::operator()(const nn::Tensor& slice, bool train) const {
  nn::Tensor h = conv2_(conv1_(slice, train), train);
  return {cls_(h), box_(h), dir_(h)};
}

DepthAwareHead::DepthAwareHead(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                               std::int64_t width, std::vector<PartSpec> parts, int anchors,
                               nn::BatchNormOptions bn)
    : parts_(std::move(parts)) {
  for (std::size_t p = 0; p < parts_.size(); ++p)
    towers_.emplace_back(store, name + ".part" + std::to_string(p + 1), in_channels, width, parts_[p],
                         anchors, bn);
}

std::vector<PartMaps> DepthAwareHead::operator()(const nn::Tensor& r, bool train) const {
  validate_parts(parts_, static_cast<int>(r.dim(3)));
  const std::vector<nn::Tensor> slices = split_parts(r, parts_);
  std::vector<PartMaps> out;
  out.reserve(slices.size());
  for (std::size_t p = 0; p < slices.size(); ++p) out.push_back(towers_[p](slices[p], train));
  return out;
}

FusedPrediction fuse_scores(std::span<const PartMaps> outputs, std::span<const PartSpec> parts,
                            int width) {
  if (outputs.size() != parts.size() || outputs.empty())
    throw UsageError("fuse_scores: one output per part required");
  FusedPrediction f;
  f.anchors = static_cast<int>(outputs[0].cls.dim(1));
  f.height = static_cast<int>(outputs[0].cls.dim(2));
  f.width = width;
  const std::size_t n = static_cast<std::size_t>(f.anchors) * f.height * width;
  f.score.assign(n, -1.0);
  f.part.assign(n, -1);
  f.box.assign(n, Residual{});
  f.direction.assign(n, 0);
  const std::int64_t plane = f.height;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const PartMaps& m = outputs[p];
    const int w = parts[p].width();
    if (m.cls.dim(3) != w || m.cls.dim(1) != f.anchors || m.cls.dim(2) != f.height)
      throw UsageError("fuse_scores: part " + std::to_string(p + 1) + " map shape mismatch");
    auto cls = m.cls.data();
    auto box = m.box.data();
    auto dir = m.dir.data();
    const std::int64_t hw = plane * w;
    for (int a = 0; a < f.anchors; ++a)
      for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < w; ++x) {
          const std::int64_t local = y * w + x;
          const double s = 1.0 / (1.0 + std::exp(-cls[a * hw + local]));
          const std::size_t g = (static_cast<std::size_t>(a) * f.height + y) * width + parts[p].lo + x;
          if (f.part[g] >= 0 && s <= f.score[g]) continue;
          f.score[g] = s;
          f.part[g] = static_cast<int>(p);
          for (int j = 0; j < 7; ++j) f.box[g][j] = box[(a * 7 + j) * hw + local];
          f.direction[g] = dir[(a * 2 + 1) * hw + local] > dir[(a * 2) * hw + local] ? 1 : 0;
        }
  }
  for (std::size_t g = 0; g < n; ++g)
    if (f.part[g] < 0) throw UsageError("fuse_scores: a cell is not covered by any part");
  return f;
}

}  // namespace voxdet
