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


// Hand-built evaluation sets with their R11 results worked out by hand.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voxdet/eval_metrics.hpp"

namespace voxdet::testing {

struct MicroDataset {
  std::string name;
  std::vector<EvalFrame> frames;
  std::optional<double> ap_3d, ap_bev, aos;  // every difficulty
};

inline EvalGt easy_gt(double x, double y, double yaw) {
  EvalGt g;
  g.box = {x, y, -1.0, 1.6, 3.9, 1.56, yaw};
  g.height_px = 60;
  return g;
}

inline Detection det_on(const EvalGt& g, double score) { return {g.box, score, 0}; }

// Shifting along the heading by d gives IoU (l - d) / (l + d) in both 3D and BEV.
inline Detection det_with_iou(const EvalGt& g, double iou, double score) {
  Detection d = det_on(g, score);
  const double shift = g.box.l * (1 - iou) / (1 + iou);
  d.box.x += shift * std::cos(g.box.yaw);
  d.box.y += shift * std::sin(g.box.yaw);
  return d;
}

inline std::vector<MicroDataset> micro_datasets() {
  std::vector<MicroDataset> sets;

  // Every gt found exactly, nothing else.
  {
    MicroDataset m{"perfect", {}, 100.0, 100.0, 100.0};
    for (int f = 0; f < 3; ++f) {
      EvalFrame fr;
      for (int k = 0; k <= f; ++k) {
        fr.gts.push_back(easy_gt(10 + 8 * k, 2 * f, 0.3 * k));
        fr.dets.push_back(det_on(fr.gts.back(), 0.9 - 0.1 * k - 0.01 * f));
      }
      m.frames.push_back(fr);
    }
    sets.push_back(m);
  }

  // One gt, a false positive ranked above the true positive: precision 1/2
  // at full recall and the envelope is 1/2 everywhere.
  {
    MicroDataset m{"one_fp", {}, 50.0, 50.0, 50.0};
    EvalFrame fr;
    fr.gts.push_back(easy_gt(20, 0, 0));
    fr.dets.push_back({{40, 10, -1, 1.6, 3.9, 1.56, 0}, 0.9, 0});
    fr.dets.push_back(det_on(fr.gts[0], 0.8));
    m.frames.push_back(fr);
    sets.push_back(m);
  }

  // Perfect boxes pointing backwards: AP is unaffected, similarity is 0.
  {
    MicroDataset m{"flipped", {}, 100.0, 100.0, 0.0};
    EvalFrame fr;
    for (int k = 0; k < 2; ++k) {
      fr.gts.push_back(easy_gt(15 + 10 * k, -3, 0.5));
      Detection d = det_on(fr.gts.back(), 0.7 - 0.1 * k);
      d.box.yaw = wrap_angle(d.box.yaw + kPi);
      fr.dets.push_back(d);
    }
    m.frames.push_back(fr);
    sets.push_back(m);
  }

  // Two gts; the higher-scored detection reaches IoU 0.71, the other 0.69.
  // Precision 1 up to recall 1/2 covers six of the eleven samples.
  {
    MicroDataset m{"threshold", {}, 100.0 * 6 / 11, 100.0 * 6 / 11, 100.0 * 6 / 11};
    EvalFrame a, b;
    a.gts.push_back(easy_gt(12, 4, 0));
    a.dets.push_back(det_with_iou(a.gts[0], 0.71, 0.9));
    b.gts.push_back(easy_gt(30, -6, kPi / 2));
    b.dets.push_back(det_with_iou(b.gts[0], 0.69, 0.8));
    m.frames = {a, b};
    sets.push_back(m);
  }

  // No ground truth at all: every metric is absent.
  {
    MicroDataset m{"empty", {}, std::nullopt, std::nullopt, std::nullopt};
    EvalFrame fr;
    fr.dets.push_back({{20, 0, -1, 1.6, 3.9, 1.56, 0}, 0.5, 0});
    m.frames = {fr, EvalFrame{}};
    sets.push_back(m);
  }
  return sets;
}

}  // namespace voxdet::testing
