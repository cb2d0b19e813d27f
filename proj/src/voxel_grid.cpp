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

#include "voxdet/voxel_grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

namespace voxdet {

void VoxelizerConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    const double extent = range_max[a] - range_min[a];
    if (!(voxel_size[a] > 0) || !(extent > 0))
      throw UsageError("voxel range and size must be positive on every axis");
    const double n = extent / voxel_size[a];
    if (std::abs(n - std::round(n)) > 1e-6 * std::max(1.0, n))
      throw UsageError("voxel range extent is not an integer multiple of the voxel size");
  }
  if (max_points_per_voxel < 1) throw UsageError("max_points_per_voxel must be >= 1");
}

std::array<int, 3> VoxelizerConfig::grid_shape() const {
  std::array<int, 3> s{};
  for (int a = 0; a < 3; ++a)
    s[a] = static_cast<int>(std::lround((range_max[a] - range_min[a]) / voxel_size[a]));
  return s;
}

namespace {

bool point_less(const LidarPoint& a, const LidarPoint& b) {
  return std::tie(a.x, a.y, a.z, a.intensity) < std::tie(b.x, b.y, b.z, b.intensity);
}

// Voxel index of a point, or false when it falls outside the grid.
bool locate(const LidarPoint& p, const VoxelizerConfig& cfg, const std::array<int, 3>& shape,
            VoxelIndex& out) {
  const double c[3] = {p.x, p.y, p.z};
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    if (!(c[a] >= cfg.range_min[a] && c[a] < cfg.range_max[a])) return false;
    idx[a] = static_cast<int>(std::floor((c[a] - cfg.range_min[a]) / cfg.voxel_size[a]));
    if (idx[a] < 0 || idx[a] >= shape[a]) return false;
  }
  out = {idx[0], idx[1], idx[2]};
  return true;
}

void mean_feature(std::span<const LidarPoint> members, std::span<const std::uint32_t> keep,
                  double* dst) {
  double s[4] = {0, 0, 0, 0};
  for (std::uint32_t k : keep) {
    const LidarPoint& p = members[k];
    s[0] += p.x;
    s[1] += p.y;
    s[2] += p.z;
    s[3] += p.intensity;
  }
  for (int c = 0; c < 4; ++c) dst[c] = s[c] / static_cast<double>(keep.size());
}

constexpr std::uint64_t kInvalid = ~std::uint64_t{0};

}  // namespace

std::vector<std::uint32_t> sample_members(std::uint32_t n, std::uint32_t keep, std::uint64_t seed,
                                          std::uint64_t voxel_key) {
  std::vector<std::uint32_t> slots(n);
  std::iota(slots.begin(), slots.end(), 0u);
  if (keep >= n) return slots;
  CounterRng rng(seed, voxel_key);
  // Partial Fisher-Yates.
  for (std::uint32_t i = 0; i < keep; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(n - i));
    std::swap(slots[i], slots[j]);
  }
  slots.resize(keep);
  std::sort(slots.begin(), slots.end());
  return slots;
}

SparseVoxelGrid voxelize(const PointCloud& cloud, const VoxelizerConfig& cfg) {
  cfg.validate();
  SparseVoxelGrid grid;
  grid.shape = cfg.grid_shape();
  grid.channels = 4;
  const auto& pts = cloud.points;
  const auto n = static_cast<std::ptrdiff_t>(pts.size());

  std::vector<std::uint64_t> keys(pts.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    VoxelIndex v;
    keys[i] = locate(pts[i], cfg, grid.shape, v) ? grid.key(v) : kInvalid;
  }

  std::vector<std::uint32_t> order;
  order.reserve(pts.size());
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (keys[i] != kInvalid) order.push_back(static_cast<std::uint32_t>(i));
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    if (point_less(pts[a], pts[b])) return true;
    if (point_less(pts[b], pts[a])) return false;
    return a < b;
  });

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (i == 0 || keys[order[i]] != keys[order[i - 1]]) starts.push_back(i);
  starts.push_back(order.size());

  const std::size_t n_sites = starts.size() - 1;
  grid.sites.resize(n_sites);
  grid.features.resize(n_sites * 4);
  const auto nx = static_cast<std::uint64_t>(grid.shape[0]);
  const auto ny = static_cast<std::uint64_t>(grid.shape[1]);
#pragma omp parallel
  {
    std::vector<LidarPoint> members;
#pragma omp for schedule(dynamic, 256)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n_sites); ++s) {
      const std::size_t b = starts[s], e = starts[s + 1];
      const std::uint64_t key = keys[order[b]];
      grid.sites[s] = {static_cast<int>(key % nx), static_cast<int>((key / nx) % ny),
                       static_cast<int>(key / (nx * ny))};
      members.clear();
      for (std::size_t i = b; i < e; ++i) members.push_back(pts[order[i]]);
      const auto keep = sample_members(static_cast<std::uint32_t>(members.size()),
                                       static_cast<std::uint32_t>(cfg.max_points_per_voxel),
                                       cfg.seed, key);
      mean_feature(members, keep, grid.features.data() + s * 4);
    }
  }
  return grid;
}

SparseVoxelGrid voxelize_reference(const PointCloud& cloud, const VoxelizerConfig& cfg) {
  cfg.validate();
  SparseVoxelGrid grid;
  grid.shape = cfg.grid_shape();
  grid.channels = 4;
  std::map<std::uint64_t, std::vector<LidarPoint>> buckets;
  for (const LidarPoint& p : cloud.points) {
    VoxelIndex v;
    if (locate(p, cfg, grid.shape, v)) buckets[grid.key(v)].push_back(p);
  }
  for (auto& [key, members] : buckets) {
    std::stable_sort(members.begin(), members.end(), point_less);
    const auto nx = static_cast<std::uint64_t>(grid.shape[0]);
    const auto ny = static_cast<std::uint64_t>(grid.shape[1]);
    grid.sites.push_back({static_cast<int>(key % nx), static_cast<int>((key / nx) % ny),
                          static_cast<int>(key / (nx * ny))});
    const auto keep = sample_members(static_cast<std::uint32_t>(members.size()),
                                     static_cast<std::uint32_t>(cfg.max_points_per_voxel),
                                     cfg.seed, key);
    grid.features.resize(grid.features.size() + 4);
    mean_feature(members, keep, grid.features.data() + grid.features.size() - 4);
  }
  return grid;
}

double sparsity(const SparseVoxelGrid& grid) {
  const double total = static_cast<double>(grid.shape[0]) * grid.shape[1] * grid.shape[2];
  if (total <= 0) return 1.0;
  return 1.0 - static_cast<double>(grid.sites.size()) / total;
}

void write_grid_dump(std::ostream& out, const SparseVoxelGrid& grid) {
  out << "shape " << grid.shape[0] << ' ' << grid.shape[1] << ' ' << grid.shape[2] << '\n';
  out << "channels " << grid.channels << '\n';
  out << "sites " << grid.sites.size() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < grid.sites.size(); ++i) {
    const VoxelIndex& v = grid.sites[i];
    out << v.x << ' ' << v.y << ' ' << v.z;
    for (double f : grid.feature(i)) {
      auto r = std::to_chars(buf, buf + sizeof buf, f);
      out << ' ' << std::string_view(buf, r.ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace voxdet
