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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "voxdet/kitti_io.hpp"

namespace voxdet {

struct VoxelizerConfig {
  std::array<double, 3> range_min{0.0, -40.0, -3.0};
  std::array<double, 3> range_max{70.4, 40.0, 1.0};
  std::array<double, 3> voxel_size{0.05, 0.05, 0.1};
  int max_points_per_voxel = 5;
  std::uint64_t seed = 0;

  /// Throws UsageError unless every extent is a positive integer multiple of
  /// the voxel size and max_points_per_voxel >= 1.
  void validate() const;
  /// Voxel counts (nx, ny, nz).
  std::array<int, 3> grid_shape() const;
};

struct VoxelIndex {
  int x = 0, y = 0, z = 0;
  bool operator==(const VoxelIndex&) const = default;
};

/// Orders by (z, y, x).
inline bool site_less(const VoxelIndex& a, const VoxelIndex& b) {
  if (a.z != b.z) return a.z < b.z;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

/// Active voxel sites sorted by (z, y, x) with a row-major feature matrix.
struct SparseVoxelGrid {
  std::array<int, 3> shape{0, 0, 0};
  int channels = 0;
  std::vector<VoxelIndex> sites;
  std::vector<double> features;  // sites.size() x channels

  std::size_t size() const { return sites.size(); }
  std::span<const double> feature(std::size_t i) const {
    return {features.data() + i * channels, static_cast<std::size_t>(channels)};
  }
  std::uint64_t key(const VoxelIndex& v) const {
    return (static_cast<std::uint64_t>(v.z) * shape[1] + v.y) * shape[0] + v.x;
  }
};

/// Points outside [range_min, range_max) are dropped. Each voxel keeps at most
/// max_points_per_voxel points, sampled without replacement by a generator
/// keyed on (seed, voxel key) over the voxel's members in value order, so the
/// output does not depend on point order or thread count. Features are the
/// means of (x, y, z, intensity).
SparseVoxelGrid voxelize(const PointCloud& cloud, const VoxelizerConfig& cfg);

/// Serial map-based reference for voxelize.
SparseVoxelGrid voxelize_reference(const PointCloud& cloud, const VoxelizerConfig& cfg);

double sparsity(const SparseVoxelGrid& grid);

/// Chooses `keep` of `n` member slots, returned ascending.
std::vector<std::uint32_t> sample_members(std::uint32_t n, std::uint32_t keep, std::uint64_t seed,
                                          std::uint64_t voxel_key);

/// Text dump: "shape nx ny nz", "channels C", "sites N", then one
/// "ix iy iz f0 f1 ..." line per site.
void write_grid_dump(std::ostream& out, const SparseVoxelGrid& grid);

}  // namespace voxdet
