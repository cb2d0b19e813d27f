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

#include "voxdet/network.hpp"

#include <algorithm>
#include <cmath>

namespace voxdet {

void ModelConfig::validate() const {
  voxel.validate();
  if (blocks.empty()) throw UsageError("vfe.blocks must list at least one block");
  if (blocks.front().in_channels != 4)
    throw UsageError("vfe.blocks: the first block must take the 4 voxel feature channels");
  for (std::size_t b = 1; b < blocks.size(); ++b)
    if (blocks[b].in_channels != blocks[b - 1].out_channels)
      throw UsageError("vfe.blocks: block " + std::to_string(b + 1) + " input channels do not match block " +
                       std::to_string(b) + " output");
  int xy = 1;
  std::array<int, 3> shape = voxel.grid_shape();
  for (const VfeBlockSpec& b : blocks) {
    xy *= b.xy_stride;
    shape = block_output_shape(shape, b);
    if (shape[0] < 1 || shape[1] < 1 || shape[2] < 1)
      throw UsageError("vfe.blocks downsample the grid to nothing");
  }
  if (xy != bev_stride)
    throw UsageError("sce.bev_stride " + std::to_string(bev_stride) + " differs from the VFE x/y downsampling " +
                     std::to_string(xy));
  const auto grid = voxel.grid_shape();
  if (grid[0] % bev_stride != 0 || grid[1] % bev_stride != 0)
    throw UsageError("voxel grid x/y extents must be multiples of the BEV stride");
  validate_parts(parts, grid[0] / bev_stride);
  if (seg_channels < 1 || det_channels < 1 || head_channels < 1)
    throw UsageError("channel widths must be positive");
  if (anchor.rotations.empty() || !(anchor.w > 0 && anchor.l > 0 && anchor.h > 0))
    throw UsageError("anchors need positive sizes and at least one rotation");
  if (!(assign.neg_iou <= assign.pos_iou)) throw UsageError("assign.neg_iou must not exceed assign.pos_iou");
  if (!(score_threshold >= 0 && score_threshold <= 1)) throw UsageError("infer.score_threshold must lie in [0, 1]");
  if (!(nms_iou >= 0 && nms_iou <= 1)) throw UsageError("infer.nms_iou must lie in [0, 1]");
  if (loss.loc < 0 || loss.dir < 0 || loss.seg < 0 || loss.focal_gamma < 0 || loss.focal_alpha < 0 ||
      loss.focal_alpha > 1)
    throw UsageError("loss weights must be nonnegative and focal alpha in [0, 1]");
}

namespace {
const ModelConfig& checked(const ModelConfig& c) {
  c.validate();
  return c;
}
}  // namespace

Detector::Detector(ModelConfig cfg)
    : cfg_(checked(cfg)),
      store_(cfg_.init_seed),
      bev_(voxdet::bev_geometry(cfg_.voxel, cfg_.bev_stride)),
      anchors_(bev_.x_min, bev_.y_min, bev_.cell_x, bev_.cell_y, bev_.nx, bev_.ny, cfg_.anchor),
      vfe_(store_, "vfe", cfg_.blocks, cfg_.bn),
      sce_(store_, "sce", vfe_.bev_channels(cfg_.voxel.grid_shape()), cfg_.seg_channels, cfg_.det_channels,
           cfg_.bn),
      head_(store_, "head", sce_.out_channels(), cfg_.head_channels, cfg_.parts,
            static_cast<int>(cfg_.anchor.rotations.size()), cfg_.bn) {}

SparseVoxelGrid Detector::voxelize(const PointCloud& cloud) const { return voxdet::voxelize(cloud, cfg_.voxel); }

nn::FeatureMap Detector::encode(const SparseVoxelGrid& grid, bool train) const { return run_vfe(grid, vfe_, train); }

SceOutput Detector::context(const nn::FeatureMap& bev, bool train) const { return sce_(bev, train); }

std::vector<PartMaps> Detector::head(const nn::Tensor& fused, bool train) const { return head_(fused, train); }

ForwardResult Detector::forward(const SparseVoxelGrid& grid, bool train) const {
  ForwardResult r;
  r.bev = encode(grid, train);
  r.sce = context(r.bev, train);
  r.parts = head(r.sce.fused, train);
  return r;
}

std::vector<Detection> decode_candidates(const FusedPrediction& fused, const AnchorGrid& anchors,
                                         double threshold) {
  if (fused.size() != anchors.size()) throw UsageError("decode: prediction and anchor counts differ");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    if (fused.score[i] < threshold) continue;
    Detection d;
    d.box = decode(fused.box[i], anchors[i], fused.direction[i]);
    d.score = fused.score[i];
    d.direction = fused.direction[i];
    if (!(std::isfinite(d.box.x) && std::isfinite(d.box.y) && std::isfinite(d.box.z) && d.box.w > 0 &&
          d.box.l > 0 && d.box.h > 0 && std::isfinite(d.box.w * d.box.l * d.box.h)))
      throw NumericError("decoded box at anchor " + std::to_string(i) + " is not finite");
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> Detector::decode(std::span<const PartMaps> parts) const {
  const FusedPrediction fused = fuse_scores(parts, cfg_.parts, bev_.nx);
  return oriented_nms(decode_candidates(fused, anchors_, cfg_.score_threshold), cfg_.nms_iou);
}

std::vector<Detection> Detector::detect(const PointCloud& cloud) const {
  nn::NoGradGuard guard;
  const ForwardResult r = forward(voxelize(cloud), false);
  return decode(r.parts);
}

SceneTargets Detector::targets(const SparseVoxelGrid& grid, std::span<const Box3D> boxes) const {
  SceneTargets t;
  t.mask = make_mask(grid, cfg_.voxel, boxes, cfg_.mask_kind, cfg_.bev_stride);
  t.assignment = assign_targets(anchors_, boxes, cfg_.assign);
  for (const PartSpec& p : cfg_.parts) t.parts.push_back(slice_targets(t.assignment, anchors_, p));
  return t;
}

std::pair<nn::Tensor, LossReport> Detector::loss(const ForwardResult& out, const SceneTargets& t) const {
  if (out.parts.size() != t.parts.size()) throw UsageError("loss: part count mismatch");
  const LossWeights& w = cfg_.loss;
  std::vector<nn::Tensor> terms;
  std::vector<double> weights;
  std::vector<PartLoss> values;
  nn::Tensor ls = seg_loss(out.sce.probability, t.mask);
  terms.push_back(ls);
  weights.push_back(w.seg);
  for (std::size_t p = 0; p < t.parts.size(); ++p) {
    const PartTargets& pt = t.parts[p];
    const double norm = std::max<double>(1.0, static_cast<double>(pt.positives.size()));
    nn::Tensor cls = focal_loss(out.parts[p].cls, pt.labels, w.focal_alpha, w.focal_gamma, norm);
    nn::Tensor loc = loc_loss(out.parts[p].box, pt.positives, pt.residuals, norm);
    nn::Tensor dir = dir_loss(out.parts[p].dir, pt.positives, pt.direction, norm);
    terms.insert(terms.end(), {loc, cls, dir});
    weights.insert(weights.end(), {w.loc, 1.0, w.dir});
    values.push_back({loc.item(), cls.item(), dir.item()});
  }
  nn::Tensor total = nn::weighted_sum(terms, weights);
  LossReport report = total_loss(values, ls.item(), w);
  return {total, report};
}

}  // namespace voxdet
