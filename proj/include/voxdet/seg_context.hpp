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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "voxdet/box_geom.hpp"
#include "voxdet/layers.hpp"
#include "voxdet/voxel_grid.hpp"

namespace voxdet {

enum class MaskKind { kVoxelType, kBoxType };

MaskKind parse_mask_kind(const std::string& s);
std::string to_string(MaskKind kind);

/// Physical layout of a BEV map: cell (ix, iy) covers
/// [x_min + ix * cell_x, x_min + (ix + 1) * cell_x) and likewise in y.
struct BevGeometry {
  double x_min = 0, y_min = 0;
  double cell_x = 0.4, cell_y = 0.4;
  int nx = 0, ny = 0;

  double center_x(int ix) const { return x_min + (ix + 0.5) * cell_x; }
  double center_y(int iy) const { return y_min + (iy + 0.5) * cell_y; }
};

/// BEV geometry of a voxel grid pooled by `stride` cells in x and y.
BevGeometry bev_geometry(const VoxelizerConfig& cfg, int stride);

/// Binary per-cell labels, row-major over (y, x).
struct SemanticMask {
  int height = 0, width = 0;
  std::vector<std::uint8_t> labels;

  bool foreground(int iy, int ix) const { return labels[static_cast<std::size_t>(iy) * width + ix] != 0; }
  std::size_t count() const;
  /// (1, 1, height, width) tensor of 0/1 values.
  nn::Tensor as_tensor() const;
};

/// Box type: a cell is foreground iff its center lies in some box's BEV
/// rectangle. Voxel type: additionally the cell must hold a non-empty voxel
/// whose center lies in some box's BEV rectangle.
SemanticMask make_mask(const SparseVoxelGrid& grid, const VoxelizerConfig& cfg,
                       std::span<const Box3D> boxes, MaskKind kind, int bev_stride = 8);

/// Cells where a (1, 1, H, W) probability map exceeds 0.5.
SemanticMask threshold_mask(const nn::Tensor& prob, double threshold = 0.5);

/// |a and b| / |a or b|; 1 when both are empty.
double mask_iou(const SemanticMask& a, const SemanticMask& b);

/// Binary portable graymap, foreground 255.
void write_pgm(std::ostream& out, const SemanticMask& mask);
/// Binary portable graymap of a (1, 1, H, W) probability map scaled to 0..255.
void write_pgm(std::ostream& out, const nn::Tensor& prob);

/// Two 3x3 conv + batch norm layers with an additive skip; ReLU after the
/// first layer and after the sum.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(nn::ParamStore& store, const std::string& name, std::int64_t channels,
                nn::BatchNormOptions bn);
  nn::Tensor operator()(const nn::Tensor& x, bool train) const;

 private:
  nn::Conv2d conv1_, conv2_;
  nn::BatchNorm bn1_, bn2_;
};

/// Feature-pyramid segmentation branch producing a (1, 1, H, W) probability
/// map. A 1x1 projection precedes the pyramid when the input width differs
/// from `width`.
class SegmentationBranch {
 public:
  SegmentationBranch() = default;
  SegmentationBranch(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                     std::int64_t width, nn::BatchNormOptions bn);
  nn::Tensor operator()(const nn::Tensor& bev, bool train) const;

 private:
  std::int64_t in_channels_ = 0;
  bool project_ = false;
  nn::ConvBnRelu proj_;
  ResidualBlock res1_, res2_, res3_, res4_, res5_;
  nn::ConvBnRelu fuse1_, fuse2_;
  nn::Conv2d head_;
};

/// One-level U-Net: stride-2 conv, conv, upsample, conv back to the input
/// width, then concatenation with the input (2C channels).
class DetectionBranch {
 public:
  DetectionBranch() = default;
  DetectionBranch(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                  std::int64_t width, nn::BatchNormOptions bn);
  nn::Tensor operator()(const nn::Tensor& bev, bool train) const;

 private:
  std::int64_t in_channels_ = 0;
  nn::ConvBnRelu down_, mid_, up_;
};

/// R = (1 + M) * F.
nn::Tensor fuse(const nn::Tensor& f, const nn::Tensor& m);

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
nn::Tensor seg_loss(const nn::Tensor& prob, const SemanticMask& mask);

struct SceOutput {
  nn::Tensor features;     // F
  nn::Tensor probability;  // M
  nn::Tensor fused;        // R
};

class SemanticContextEncoder {
 public:
  SemanticContextEncoder() = default;
  SemanticContextEncoder(nn::ParamStore& store, const std::string& name, std::int64_t in_channels,
                         std::int64_t seg_width, std::int64_t det_width, nn::BatchNormOptions bn);
  SceOutput operator()(const nn::Tensor& bev, bool train) const;
  std::int64_t out_channels() const { return 2 * in_channels_; }

 private:
  std::int64_t in_channels_ = 0;
  SegmentationBranch seg_;
  DetectionBranch det_;
};

}  // namespace voxdet
