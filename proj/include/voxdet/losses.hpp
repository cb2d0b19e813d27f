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
#include "voxdet/depth_head.hpp"
#include "voxdet/tensor.hpp"

namespace voxdet {

struct AssignConfig {
  double pos_iou = 0.6;
  double neg_iou = 0.45;
  IouKind iou = IouKind::k3d;
};

enum : std::int8_t { kIgnored = -1, kNegative = 0, kPositive = 1 };

/// Per-anchor targets indexed by anchor ordinal.
struct TargetAssignment {
  std::vector<std::int8_t> labels;
  std::vector<int> matched;          // gt index, -1 when unmatched
  std::vector<double> max_iou;
  std::vector<Residual> residuals;   // meaningful for positives only
  std::vector<int> direction;        // meaningful for positives only

  std::size_t num_positive() const;
};

/// Residual target for `gt` against `anchor`. The gt yaw is first moved by a
/// multiple of pi to the representative nearest the anchor yaw, so the yaw
/// residual lies in [-pi/2, pi/2]; the direction bit carries the rest.
Residual encode_target(const Box3D& gt, const Box3D& anchor);

/// Threshold rule on the best IoU per anchor, then each gt forces its best
/// anchor (lowest ordinal on ties, skipped when that IoU is 0) positive.
TargetAssignment assign_targets(const AnchorGrid& anchors, std::span<const Box3D> gts,
                                const AssignConfig& cfg);

/// Targets restricted to one part's x interval, in the part's local layout
/// (a * H + y) * w + (x - lo).
struct PartTargets {
  int anchors = 0, height = 0, width = 0;
  std::vector<std::int8_t> labels;
  std::vector<int> positives;  // local anchor indices
  std::vector<Residual> residuals;
  std::vector<int> direction;
};

PartTargets slice_targets(const TargetAssignment& t, const AnchorGrid& anchors, const PartSpec& part);

struct LossWeights {
  double loc = 2.0;
  double dir = 0.2;
  double seg = 0.5;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

/// Sum over non-ignored anchors of -alpha_t (1 - p_t)^gamma ln p_t, divided by
/// `normalizer`. Logits share the flat layout of `labels`.
nn::Tensor focal_loss(const nn::Tensor& logits, std::span<const std::int8_t> labels, double alpha,
                      double gamma, double normalizer);

/// SmoothL1 over the 7 residual components of each positive, divided by
/// `normalizer`. `box` is a (1, 7A, H, w) map.
nn::Tensor loc_loss(const nn::Tensor& box, std::span<const int> positives,
                    std::span<const Residual> targets, double normalizer);

/// Two-bin softmax cross-entropy on the positives, divided by `normalizer`.
/// `dir` is a (1, 2A, H, w) map.
nn::Tensor dir_loss(const nn::Tensor& dir, std::span<const int> positives,
                    std::span<const int> bits, double normalizer);

struct PartLoss {
  double loc = 0, cls = 0, dir = 0;
};

struct LossReport {
  double total = 0;
  double seg = 0;
  std::vector<PartLoss> parts;
};

/// L = w.seg * L_S + sum over parts of (w.loc * L_loc + L_cls + w.dir * L_dir).
LossReport total_loss(std::span<const PartLoss> parts, double seg, const LossWeights& w);

/// "step,total,L_S,L_loc_1..n,L_cls_1..n,L_dir_1..n".
std::string loss_csv_header(std::size_t parts);
std::string loss_csv_row(std::size_t step, const LossReport& r);

}  // namespace voxdet
