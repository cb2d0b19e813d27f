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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxdet/box_geom.hpp"
#include "voxdet/kitti_io.hpp"

namespace voxdet {

enum class ApMode { kR11, kR40 };

ApMode parse_ap_mode(const std::string& s);
std::string to_string(ApMode mode);

struct DifficultyRule {
  std::string name;
  double min_height = 0;   // image box height, px
  int max_occlusion = 0;
  double max_truncation = 0;

  bool operator==(const DifficultyRule&) const = default;
};

/// easy (40 px, 0, 0.15), moderate (25 px, 1, 0.30), hard (25 px, 2, 0.50).
std::vector<DifficultyRule> kitti_difficulties();

/// Ground truth with the label metadata the strata need.
struct EvalGt {
  Box3D box;
  double height_px = 0;
  int occlusion = 0;
  double truncation = 0;
  bool dont_care = false;    // detections centered inside are not counted
  bool other_class = false;  // a neighbouring class (e.g. Van): never a miss, absorbs one match
};

struct EvalFrame {
  std::vector<EvalGt> gts;
  std::vector<Detection> dets;
};

/// Cars become regular ground truth, Vans become other_class, DontCare
/// records with positive dimensions become dont_care regions; all else is
/// dropped.
std::vector<EvalGt> eval_gts_from_labels(std::span<const LabelRecord> labels, const CalibMatrices& calib);

enum class GtState : std::uint8_t { kValid, kIgnored, kDontCare };

std::vector<GtState> stratify(std::span<const EvalGt> gts, const DifficultyRule& rule);

enum : std::int8_t { kDetIgnored = -1, kDetFalsePositive = 0, kDetTruePositive = 1 };

struct FrameMatch {
  std::vector<std::int8_t> det_state;
  std::vector<int> det_gt;         // matched gt for true positives, else -1
  std::vector<bool> gt_matched;
  std::size_t num_valid_gt = 0;
};

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

/// Greedy matching in detection order (descending score, enforced). A
/// detection takes the unmatched valid gt of highest IoU >= threshold; failing
/// that it is ignored when it reaches an unmatched ignored gt or its center
/// lies in a dont-care region; otherwise it is a false positive.
FrameMatch match_frame(std::span<const Detection> dets, std::span<const EvalGt> gts,
                       std::span<const GtState> states, const IouFn& iou, double threshold);

/// A scored, non-ignored detection in the global ranking.
struct RankedDet {
  double score = 0;
  bool tp = false;
  double similarity = 0;  // (1 + cos dtheta) / 2 for true positives
};

/// Sorted by descending score; equal scores keep their order.
void rank(std::vector<RankedDet>& dets);

/// Recall sample points: {0, 0.1, ..., 1} or {1/40, ..., 1}.
std::vector<double> recall_points(ApMode mode);

/// Percent. Absent when there are no valid gts. `dets` must be ranked.
std::optional<double> average_precision(std::span<const RankedDet> dets, std::size_t num_gt, ApMode mode);
std::optional<double> average_orientation_similarity(std::span<const RankedDet> dets, std::size_t num_gt,
                                                     ApMode mode);

struct EvalConfig {
  ApMode mode = ApMode::kR11;
  double iou_3d = 0.7;
  double iou_bev = 0.7;
  std::vector<DifficultyRule> difficulties = kitti_difficulties();
};

struct DifficultyResult {
  std::string name;
  std::size_t num_gt = 0;
  std::optional<double> ap_3d, ap_bev, aos;
};

struct EvalResult {
  std::vector<DifficultyResult> rows;
};

/// AOS uses the BEV matching.
EvalResult evaluate(std::span<const EvalFrame> frames, const EvalConfig& cfg);

/// Rows 3D / BEV / Orientation, columns per difficulty; "-" for absent.
std::string format_table(const EvalResult& r);
/// "<difficulty>.<metric> = value" lines.
std::string format_kv(const EvalResult& r);

}  // namespace voxdet
