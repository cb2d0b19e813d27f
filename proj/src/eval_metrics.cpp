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

#include "voxdet/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace voxdet {

ApMode parse_ap_mode(const std::string& s) {
  if (s == "R11") return ApMode::kR11;
  if (s == "R40") return ApMode::kR40;
  throw UsageError("unknown AP mode '" + s + "' (expected R11 or R40)");
}

std::string to_string(ApMode mode) { return mode == ApMode::kR11 ? "R11" : "R40"; }

std::vector<DifficultyRule> kitti_difficulties() {
  return {{"easy", 40, 0, 0.15}, {"moderate", 25, 1, 0.30}, {"hard", 25, 2, 0.50}};
}

std::vector<EvalGt> eval_gts_from_labels(std::span<const LabelRecord> labels, const CalibMatrices& calib) {
  std::vector<EvalGt> out;
  for (const LabelRecord& l : labels) {
    EvalGt g;
    if (l.type == "Car") {
    } else if (l.type == "Van") {
      g.other_class = true;
    } else if (l.dont_care()) {
      if (!(l.height > 0 && l.width > 0 && l.length > 0)) continue;
      g.dont_care = true;
    } else {
      continue;
    }
    g.box = camera_box_to_lidar(l, calib);
    g.height_px = l.bbox_height();
    g.occlusion = l.occlusion;
    g.truncation = l.truncation;
    out.push_back(g);
  }
  return out;
}

std::vector<GtState> stratify(std::span<const EvalGt> gts, const DifficultyRule& rule) {
  std::vector<GtState> s(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const EvalGt& g = gts[i];
    if (g.dont_care) s[i] = GtState::kDontCare;
    else if (g.other_class) s[i] = GtState::kIgnored;
    else if (g.height_px >= rule.min_height && g.occlusion <= rule.max_occlusion &&
             g.truncation <= rule.max_truncation)
      s[i] = GtState::kValid;
    else
      s[i] = GtState::kIgnored;
  }
  return s;
}

FrameMatch match_frame(std::span<const Detection> dets, std::span<const EvalGt> gts,
                       std::span<const GtState> states, const IouFn& iou, double threshold) {
  if (states.size() != gts.size()) throw UsageError("match_frame: one state per gt required");
  for (std::size_t i = 1; i < dets.size(); ++i)
    if (dets[i].score > dets[i - 1].score) throw UsageError("match_frame: detections must be sorted by score");
  FrameMatch m;
  m.det_state.assign(dets.size(), kDetFalsePositive);
  m.det_gt.assign(dets.size(), -1);
  m.gt_matched.assign(gts.size(), false);
  for (GtState s : states) m.num_valid_gt += s == GtState::kValid;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    int best = -1, best_ignored = -1;
    double best_iou = threshold, best_ignored_iou = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_matched[g] || states[g] == GtState::kDontCare) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (states[g] == GtState::kValid) {
        if (v >= best_iou && (best < 0 || v > best_iou)) {
          best = static_cast<int>(g);
          best_iou = v;
        }
      } else if (v >= best_ignored_iou && (best_ignored < 0 || v > best_ignored_iou)) {
        best_ignored = static_cast<int>(g);
        best_ignored_iou = v;
      }
    }
    if (best >= 0) {
      m.det_state[d] = kDetTruePositive;
      m.det_gt[d] = best;
      m.gt_matched[best] = true;
      continue;
    }
    if (best_ignored >= 0) {
      m.det_state[d] = kDetIgnored;
      m.gt_matched[best_ignored] = true;
      continue;
    }
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (states[g] == GtState::kDontCare && bev_contains(gts[g].box, dets[d].box.x, dets[d].box.y)) {
        m.det_state[d] = kDetIgnored;
        break;
      }
  }
  return m;
}

void rank(std::vector<RankedDet>& dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const RankedDet& a, const RankedDet& b) { return a.score > b.score; });
}

std::vector<double> recall_points(ApMode mode) {
  std::vector<double> r;
  if (mode == ApMode::kR11)
    for (int i = 0; i <= 10; ++i) r.push_back(i / 10.0);
  else
    for (int i = 1; i <= 40; ++i) r.push_back(i / 40.0);
  return r;
}

namespace {

// Envelope of value_k (precision or similarity of the first k detections)
// over the points where recall_k >= r, averaged over the recall samples.
std::optional<double> envelope_average(std::span<const RankedDet> dets, std::size_t num_gt, ApMode mode,
                                       bool orientation) {
  if (num_gt == 0) return std::nullopt;
  for (std::size_t i = 1; i < dets.size(); ++i)
    if (dets[i].score > dets[i - 1].score) throw UsageError("AP: detections must be ranked by score");
  std::vector<double> recall(dets.size()), value(dets.size());
  std::size_t tp = 0;
  double sim = 0;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (dets[k].tp) {
      ++tp;
      sim += dets[k].similarity;
    }
    recall[k] = static_cast<double>(tp) / static_cast<double>(num_gt);
    value[k] = (orientation ? sim : static_cast<double>(tp)) / static_cast<double>(k + 1);
  }
  // Suffix maximum turns the curve into its envelope.
  for (std::size_t k = dets.size(); k-- > 1;) value[k - 1] = std::max(value[k - 1], value[k]);
  const std::vector<double> points = recall_points(mode);
  double total = 0;
  std::size_t k = 0;
  for (double r : points) {
    while (k < dets.size() && recall[k] < r) ++k;
    if (k < dets.size()) total += value[k];
  }
  return 100.0 * total / static_cast<double>(points.size());
}

}  // namespace

std::optional<double> average_precision(std::span<const RankedDet> dets, std::size_t num_gt, ApMode mode) {
  return envelope_average(dets, num_gt, mode, false);
}

std::optional<double> average_orientation_similarity(std::span<const RankedDet> dets, std::size_t num_gt,
                                                     ApMode mode) {
  return envelope_average(dets, num_gt, mode, true);
}

namespace {

struct Ranking {
  std::vector<RankedDet> dets;
  std::size_t num_gt = 0;
};

Ranking collect(std::span<const EvalFrame> frames, const DifficultyRule& rule, const IouFn& iou,
                double threshold) {
  std::vector<FrameMatch> matches(frames.size());
  std::vector<std::vector<Detection>> sorted(frames.size());
  const auto n = static_cast<std::int64_t>(frames.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t f = 0; f < n; ++f) {
    sorted[f] = frames[f].dets;
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    const std::vector<GtState> states = stratify(frames[f].gts, rule);
    matches[f] = match_frame(sorted[f], frames[f].gts, states, iou, threshold);
  }
  Ranking r;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    r.num_gt += matches[f].num_valid_gt;
    for (std::size_t d = 0; d < sorted[f].size(); ++d) {
      const std::int8_t s = matches[f].det_state[d];
      if (s == kDetIgnored) continue;
      RankedDet rd;
      rd.score = sorted[f][d].score;
      rd.tp = s == kDetTruePositive;
      if (rd.tp) {
        const double dt = sorted[f][d].box.yaw - frames[f].gts[matches[f].det_gt[d]].box.yaw;
        rd.similarity = (1.0 + std::cos(dt)) / 2.0;
      }
      r.dets.push_back(rd);
    }
  }
  rank(r.dets);
  return r;
}

}  // namespace

EvalResult evaluate(std::span<const EvalFrame> frames, const EvalConfig& cfg) {
  EvalResult result;
  const IouFn iou3 = [](const Box3D& a, const Box3D& b) { return iou3d(a, b); };
  const IouFn ioub = [](const Box3D& a, const Box3D& b) { return bev_iou(a, b); };
  for (const DifficultyRule& rule : cfg.difficulties) {
    DifficultyResult row;
    row.name = rule.name;
    const Ranking r3 = collect(frames, rule, iou3, cfg.iou_3d);
    const Ranking rb = collect(frames, rule, ioub, cfg.iou_bev);
    row.num_gt = r3.num_gt;
    row.ap_3d = average_precision(r3.dets, r3.num_gt, cfg.mode);
    row.ap_bev = average_precision(rb.dets, rb.num_gt, cfg.mode);
    row.aos = average_orientation_similarity(rb.dets, rb.num_gt, cfg.mode);
    result.rows.push_back(row);
  }
  return result;
}

namespace {
std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}
}  // namespace

std::string format_table(const EvalResult& r) {
  std::string out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "metric");
  out += buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, " %10s", row.name.c_str());
    out += buf;
  }
  out += '\n';
  const std::pair<const char*, std::optional<double> DifficultyResult::*> metrics[] = {
      {"3D", &DifficultyResult::ap_3d}, {"BEV", &DifficultyResult::ap_bev}, {"Orientation", &DifficultyResult::aos}};
  for (const auto& [name, field] : metrics) {
    std::snprintf(buf, sizeof buf, "%-12s", name);
    out += buf;
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, " %10s", cell(row.*field).c_str());
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string format_kv(const EvalResult& r) {
  std::string out;
  for (const auto& row : r.rows) {
    out += row.name + ".num_gt = " + std::to_string(row.num_gt) + "\n";
    out += row.name + ".ap_3d = " + cell(row.ap_3d) + "\n";
    out += row.name + ".ap_bev = " + cell(row.ap_bev) + "\n";
    out += row.name + ".aos = " + cell(row.aos) + "\n";
  }
  return out;
}

}  // namespace voxdet
