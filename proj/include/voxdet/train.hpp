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
#include <span>
#include <vector>

#include "voxdet/augment.hpp"
#include "voxdet/layers.hpp"
#include "voxdet/losses.hpp"
#include "voxdet/network.hpp"

namespace voxdet {

struct TrainConfig {
  int steps = 200;
  std::uint64_t seed = 0;
  nn::AdamWConfig optim;
  AugmentConfig augment;
  RansacConfig ransac;
};

struct TrainResult {
  std::vector<LossReport> trace;
  /// 1 - mean(last 10 totals) / mean(first 10 totals).
  double loss_drop = 0;
  /// Pooled BEV IoU between thresholded predicted masks and the targets.
  double seg_iou = 0;
};

double loss_drop(std::span<const LossReport> trace, std::size_t window = 10);

/// Pooled intersection-over-union of eval-mode segmentation masks over
/// `scenes`.
double segmentation_iou(const Detector& model, std::span<const Scene> scenes);

using StepCallback = std::function<void(std::size_t step, const LossReport&)>;

/// One scene per step, cycling through `scenes` in order. Throws
/// NumericError naming the step when the loss stops being finite.
TrainResult train_toy(Detector& model, std::span<const Scene> scenes, const TrainConfig& cfg,
                      const StepCallback& on_step = {});

}  // namespace voxdet
