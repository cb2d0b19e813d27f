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

#include "voxdet/seg_context.hpp"

#include "voxdet/depth_head.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace voxdet {

MaskKind parse_mask_kind(const std::string& s) {
  if (s == "voxel_type") return MaskKind::kVoxelType;
  if (s == "box_type") return MaskKind::kBoxType;
  throw UsageError("unknown mask kind '" + s + "' (expected voxel_type or box_type)");
}

std::string to_string(MaskKind kind) {
  return kind == MaskKind::kVoxelType ? "voxel_type" : "box_type";
}

BevGeometry bev_geometry(const VoxelizerConfig& cfg, int stride) {
  if (stride < 1) throw UsageError("bev stride must be >= 1");
  const auto shape = cfg.grid_shape();
  BevGeometry g;
  g.x_min = cfg.range_min[0];
  g.y_min = cfg.range_min[1];
  g.cell_x = cfg.voxel_size[0] * stride;
  g.cell_y = cfg.voxel_size[1] * stride;
  g.nx = shape[0] / stride;
  g.ny = shape[1] / stride;
  return g;
}

std::size_t SemanticMask::count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

nn::Tensor SemanticMask::as_tensor() const {
  return nn::Tensor({1, 1, height, width}, std::vector<double>(labels.begin(), labels.end()));
}

namespace {
bool inside_any(std::span<const Box3D> boxes, double x, double y) {
  for (const Box3D& b : boxes)
    if (bev_contains(b, x, y)) return true;
  return false;
}
}  // namespace

SemanticMask make_mask(const SparseVoxelGrid& grid, const VoxelizerConfig& cfg,
                       std::span<const Box3D> boxes, MaskKind kind, int bev_stride) {
  const BevGeometry g = bev_geometry(cfg, bev_stride);
  SemanticMask mask;
  mask.height = g.ny;
  mask.width = g.nx;
  mask.labels.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  if (boxes.empty()) return mask;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (inside_any(boxes, g.center_x(ix), g.center_y(iy)))
        mask.labels[static_cast<std::size_t>(iy) * g.nx + ix] = 1;
  if (kind == MaskKind::kBoxType) return mask;

  std::vector<std::uint8_t> occupied(mask.labels.size(), 0);
  for (const VoxelIndex& v : grid.sites) {
    const int cx = v.x / bev_stride, cy = v.y / bev_stride;
    if (cx >= g.nx || cy >= g.ny) continue;
    const std::size_t cell = static_cast<std::size_t>(cy) * g.nx + cx;
    if (!mask.labels[cell] || occupied[cell]) continue;
    const double vx = cfg.range_min[0] + (v.x + 0.5) * cfg.voxel_size[0];
    const double vy = cfg.range_min[1] + (v.y + 0.5) * cfg.voxel_size[1];
    if (inside_any(boxes, vx, vy)) occupied[cell] = 1;
  }
  mask.labels = std::move(occupied);
  return mask;
}

SemanticMask threshold_mask(const nn::Tensor& prob, double threshold) {
  if (prob.rank() != 4 || prob.dim(0) != 1 || prob.dim(1) != 1)
    throw UsageError("threshold_mask: expected a (1, 1, H, W) map");
  SemanticMask m;
  m.height = static_cast<int>(prob.dim(2));
  m.width = static_cast<int>(prob.dim(3));
  auto d = prob.data();
  m.labels.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m.labels[i] = d[i] > threshold ? 1 : 0;
  return m;
}

double mask_iou(const SemanticMask& a, const SemanticMask& b) {
  if (a.height != b.height || a.width != b.width) throw UsageError("mask_iou: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    inter += a.labels[i] && b.labels[i];
    uni += a.labels[i] || b.labels[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_pgm(std::ostream& out, const SemanticMask& mask) {
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (std::uint8_t v : mask.labels) out.put(static_cast<char>(v ? 255 : 0));
}

void write_pgm(std::ostream& out, const nn::Tensor& prob) {
  if (prob.rank() != 4 || prob.dim(1) != 1) throw UsageError("write_pgm: expected a (1, 1, H, W) map");
  out << "P5\n" << prob.dim(3) << ' ' << prob.dim(2) << "\n255\n";
  for (double v : prob.data())
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255))));
}

// ---------------------------------------------------------------------------

ResidualBlock::ResidualBlock(nn::ParamStore& store, const std::string& name, std::int64_t channels,
                             nn::BatchNormOptions bn)
    : conv1_(store, name + ".conv1", channels, channels, 3, {1, 1, 1}, false),
      conv2_(store, name + ".conv2", channels, channels, 3, {1, 1, 1}, false),
      bn1_(store, name + ".bn1", channels, bn),
      bn2_(store, name + ".bn2", channels, bn) {}

nn::Tensor ResidualBlock::operator()(const nn::Tensor& x, bool train) const {
  nn::Tensor h = nn::relu(bn1_(conv1_(x), train));
  return nn::relu(nn::add(bn2_(conv2_(h), train), x));
}

SegmentationBranch::SegmentationBranch(nn::ParamStore& store, const std::string& name,
                                       std::int64_t in_channels, std::int64_t width,
                                       nn::BatchNormOptions bn)
    : in_channels_(in_channels), project_(in_channels != width) {
  if (in_channels <= 0 || width <= 0) throw UsageError("segmentation branch widths must be positive");
  if (project_) proj_ = nn::ConvBnRelu(store, name + ".proj", in_channels, width, 1, {1, 0, 1}, bn);
  res1_ = ResidualBlock(store, name + ".res1", width, bn);
  res2_ = ResidualBlock(store, name + ".res2", width, bn);
  res3_ = ResidualBlock(store, name + ".res3", width, bn);
  fuse1_ = nn::ConvBnRelu(store, name + ".fuse1", width, width, 3, {1, 1, 1}, bn);
  res4_ = ResidualBlock(store, name + ".res4", width, bn);
  fuse2_ = nn::ConvBnRelu(store, name + ".fuse2", width, width, 3, {1, 1, 1}, bn);
  res5_ = ResidualBlock(store, name + ".res5", width, bn);
  head_ = nn::Conv2d(store, name + ".head", width, 1, 1, {1, 0, 1}, true, kHeadInitStd);
  for (double& b : head_.bias().data()) b = -std::log((1 - kClassPrior) / kClassPrior);
}

nn::Tensor SegmentationBranch::operator()(const nn::Tensor& bev, bool train) const {
  if (bev.rank() != 4 || bev.dim(1) != in_channels_)
    throw UsageError("segmentation branch expects " + std::to_string(in_channels_) + " channels");
  const std::int64_t h = bev.dim(2), w = bev.dim(3);
  nn::Tensor x = project_ ? proj_(bev, train) : bev;
  nn::Tensor r1 = res1_(x, train);
  nn::Tensor r2 = res2_(nn::max_pool2(r1), train);
  nn::Tensor r3 = res3_(nn::max_pool2(r2), train);
  nn::Tensor u2 = nn::add(nn::upsample_nearest2(r3, r2.dim(2), r2.dim(3)), r2);
  nn::Tensor p2 = res4_(fuse1_(u2, train), train);
  nn::Tensor u1 = nn::add(nn::upsample_nearest2(p2, h, w), r1);
  nn::Tensor p1 = res5_(fuse2_(u1, train), train);
  return nn::sigmoid(head_(p1));
}

DetectionBranch::DetectionBranch(nn::ParamStore& store, const std::string& name,
                                 std::int64_t in_channels, std::int64_t width, nn::BatchNormOptions bn)
    : in_channels_(in_channels),
      down_(store, name + ".down", in_channels, width, 3, {2, 1, 1}, bn),
      mid_(store, name + ".mid", width, width, 3, {1, 1, 1}, bn),
      up_(store, name + ".up", width, in_channels, 3, {1, 1, 1}, bn) {
  if (in_channels <= 0 || width <= 0) throw UsageError("detection branch widths must be positive");
}

nn::Tensor DetectionBranch::operator()(const nn::Tensor& bev, bool train) const {
  if (bev.rank() != 4 || bev.dim(1) != in_channels_)
    throw UsageError("detection branch expects " + std::to_string(in_channels_) + " channels");
  nn::Tensor d = mid_(down_(bev, train), train);
  nn::Tensor u = up_(nn::upsample_nearest2(d, bev.dim(2), bev.dim(3)), train);
  return nn::concat_channels(bev, u);
}

nn::Tensor fuse(const nn::Tensor& f, const nn::Tensor& m) { return nn::reweight(f, m); }

nn::Tensor seg_loss(const nn::Tensor& prob, const SemanticMask& mask) {
  if (prob.rank() != 4 || prob.dim(1) != 1 || prob.dim(2) != mask.height || prob.dim(3) != mask.width)
    throw UsageError("seg_loss: probability map shape does not match the mask");
  constexpr double kEps = 1e-7;
  auto p = prob.data();
  const double n = static_cast<double>(p.size());
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kEps, 1 - kEps);
    total -= mask.labels[i] ? std::log(q) : std::log(1 - q);
  }
  return nn::make_op({1}, {total / n}, {prob},
                     [prob, labels = mask.labels, n](std::span<const double> g) {
                       auto p = prob.data();
                       auto gp = prob.grad_mut();
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         if (p[i] < kEps || p[i] > 1 - kEps) continue;
                         gp[i] += g[0] * (labels[i] ? -1.0 / p[i] : 1.0 / (1 - p[i])) / n;
                       }
                     });
}

SemanticContextEncoder::SemanticContextEncoder(nn::ParamStore& store, const std::string& name,
                                               std::int64_t in_channels, std::int64_t seg_width,
                                               std::int64_t det_width, nn::BatchNormOptions bn)
    : in_channels_(in_channels),
      seg_(store, name + ".seg", in_channels, seg_width, bn),
      det_(store, name + ".det", in_channels, det_width, bn) {}

SceOutput SemanticContextEncoder::operator()(const nn::Tensor& bev, bool train) const {
  SceOutput out;
  out.features = det_(bev, train);
  out.probability = seg_(bev, train);
  out.fused = fuse(out.features, out.probability);
  return out;
}

}  // namespace voxdet
