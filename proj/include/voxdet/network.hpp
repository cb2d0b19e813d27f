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
#include <utility>
#include <vector>

#include "voxdet/box_geom.hpp"
#include "voxdet/depth_head.hpp"
#include "voxdet/kitti_io.hpp"
#include "voxdet/layers.hpp"
#include "voxdet/losses.hpp"
#include "voxdet/seg_context.hpp"
#include "voxdet/sparse_conv.hpp"
#include "voxdet/voxel_grid.hpp"

namespace voxdet {

struct ModelConfig {
  VoxelizerConfig voxel;
  std::vector<VfeBlockSpec> blocks = default_vfe_blocks();
  nn::BatchNormOptions bn;
  int seg_channels = 128;
  int det_channels = 128;
  MaskKind mask_kind = MaskKind::kBoxType;
  int bev_stride = 8;
  std::vector<PartSpec> parts = default_parts();
  int head_channels = 128;
  AnchorConfig anchor;
  AssignConfig assign;
  LossWeights loss;
  double score_threshold = 0.3;
  double nms_iou = 0.05;
  std::uint64_t init_seed = 0;

  /// Cross-module checks: voxel grid, block chaining, BEV stride against the
  /// VFE downsampling, part bounds against the BEV width.
  void validate() const;
};

struct ForwardResult {
  nn::FeatureMap bev;
  SceOutput sce;
  std::vector<PartMaps> parts;
};

struct SceneTargets {
  SemanticMask mask;
  TargetAssignment assignment;
  std::vector<PartTargets> parts;
};

class Detector {
 public:
  explicit Detector(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const AnchorGrid& anchors() const { return anchors_; }
  const BevGeometry& bev_geometry() const { return bev_; }

  SparseVoxelGrid voxelize(const PointCloud& cloud) const;

  nn::FeatureMap encode(const SparseVoxelGrid& grid, bool train) const;
  SceOutput context(const nn::FeatureMap& bev, bool train) const;
  std::vector<PartMaps> head(const nn::Tensor& fused, bool train) const;
  ForwardResult forward(const SparseVoxelGrid& grid, bool train) const;

  /// Score fusion, thresholding, residual decoding and oriented NMS.
  std::vector<Detection> decode(std::span<const PartMaps> parts) const;
  /// Eval-mode forward without gradient recording.
  std::vector<Detection> detect(const PointCloud& cloud) const;

  SceneTargets targets(const SparseVoxelGrid& grid, std::span<const Box3D> boxes) const;
  std::pair<nn::Tensor, LossReport> loss(const ForwardResult& out, const SceneTargets& t) const;

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  BevGeometry bev_;
  AnchorGrid anchors_;
  VoxelFeatureEncoder vfe_;
  SemanticContextEncoder sce_;
  DepthAwareHead head_;
};

/// Detections above `threshold` before NMS, in anchor ordinal order.
std::vector<Detection> decode_candidates(const FusedPrediction& fused, const AnchorGrid& anchors,
                                         double threshold);

}  // namespace voxdet
