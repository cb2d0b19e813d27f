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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "voxdet/augment.hpp"
#include "voxdet/eval_metrics.hpp"
#include "voxdet/network.hpp"
#include "voxdet/train.hpp"

namespace voxdet {

/// Every tunable of the pipeline. Text form: one "key = value" per line,
/// '#' starts a comment, lists are comma separated and records within a list
/// are separated by ';'. Keys absent from a file keep their defaults.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticConfig data;
  EvalConfig eval;

  /// "default" or "toy" (1/8 x extent, 10 m wide).
  static RunConfig preset(const std::string& name);

  static const std::vector<std::string>& keys();
  std::string get(const std::string& key) const;
  /// Throws UsageError for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);

  /// All keys in registration order, doubles in shortest round-trip form.
  std::string dump() const;
  /// Applies the assignments of `in` on top of `*this`.
  void merge(std::istream& in);
  void merge_file(const std::filesystem::path& path);

  void validate() const;
};

}  // namespace voxdet
