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

#include "voxdet/train.hpp"

#include <cmath>
#include <numeric>
#include <optional>

namespace voxdet {

double loss_drop(std::span<const LossReport> trace, std::size_t window) {
  if (trace.empty()) return 0;
  window = std::min(window, trace.size());
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < window; ++i) {
    head += trace[i].total;
    tail += trace[trace.size() - window + i].total;
  }
  return head > 0 ? 1.0 - tail / head : 0.0;
}

double segmentation_iou(const Detector& model, std::span<const Scene> scenes) {
  nn::NoGradGuard guard;
  std::size_t inter = 0, uni = 0;
  for (const Scene& s : scenes) {
    const SparseVoxelGrid grid = model.voxelize(s.cloud);
    const SemanticMask target = make_mask(grid, model.config().voxel, s.boxes, model.config().mask_kind,
                                          model.config().bev_stride);
    const SemanticMask pred = threshold_mask(model.context(model.encode(grid, false), false).probability);
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
      inter += pred.labels[i] && target.labels[i];
      uni += pred.labels[i] || target.labels[i];
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TrainResult train_toy(Detector& model, std::span<const Scene> scenes, const TrainConfig& cfg,
                      const StepCallback& on_step) {
  if (scenes.empty()) throw UsageError("train_toy needs at least one scene");
  if (cfg.steps < 0) throw UsageError("train.steps must be >= 0");
  std::vector<nn::Tensor> params = model.params().trainable();
  nn::AdamWState state;
  std::mt19937_64 rng(cfg.seed);

  std::vector<GtSample> database;
  std::vector<GroundPlane> planes;
  std::vector<std::optional<std::pair<SparseVoxelGrid, SceneTargets>>> cache(scenes.size());
  if (cfg.augment.enabled) {
    database = build_gt_database(scenes);
    for (const Scene& s : scenes) planes.push_back(fit_ground_plane(s.cloud, cfg.ransac));
  }

  TrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    const std::size_t idx = static_cast<std::size_t>(step) % scenes.size();
    SparseVoxelGrid grid;
    SceneTargets targets;
    if (cfg.augment.enabled) {
      const Scene aug = augment_scene(scenes[idx], database, planes[idx], cfg.augment, rng);
      grid = model.voxelize(aug.cloud);
      targets = model.targets(grid, aug.boxes);
    } else {
      if (!cache[idx]) {
        SparseVoxelGrid g = model.voxelize(scenes[idx].cloud);
        SceneTargets t = model.targets(g, scenes[idx].boxes);
        cache[idx].emplace(std::move(g), std::move(t));
      }
      grid = cache[idx]->first;
      targets = cache[idx]->second;
    }

    model.params().zero_grad();
    const ForwardResult out = model.forward(grid, true);
    auto [total, report] = model.loss(out, targets);
    if (!std::isfinite(report.total))
      throw NumericError("training diverged at step " + std::to_string(step) + ": loss is not finite");
    nn::backward(total);
    nn::adamw_step(params, state, cfg.optim);
    result.trace.push_back(report);
    if (on_step) on_step(static_cast<std::size_t>(step), report);
  }
  result.loss_drop = loss_drop(result.trace);
  result.seg_iou = segmentation_iou(model, scenes);
  return result;
}

}  // namespace voxdet
