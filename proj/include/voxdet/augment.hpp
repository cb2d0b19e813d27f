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
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "voxdet/box_geom.hpp"
#include "voxdet/kitti_io.hpp"
#include "voxdet/voxel_grid.hpp"

namespace voxdet {

/// a*x + b*y + c*z + d = 0 with a unit normal and c >= 0.
struct GroundPlane {
  double a = 0, b = 0, c = 1, d = 0;

  double distance(double x, double y, double z) const { return a * x + b * y + c * z + d; }
  /// z of the plane above (x, y); requires c > 0.
  double height_at(double x, double y) const { return -(a * x + b * y + d) / c; }
};

struct RansacConfig {
  int iterations = 100;
  double inlier_tol = 0.1;
  std::uint64_t seed = 0;
};

/// Seeded RANSAC over 3-point samples followed by a total least squares refit
/// on the inliers of the best sample. Throws DataError without 3 non-collinear
/// points.
GroundPlane fit_ground_plane(const PointCloud& cloud, const RansacConfig& cfg);
std::size_t count_inliers(const PointCloud& cloud, const GroundPlane& plane, double tol);

struct Scene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
};

/// A stored ground truth with the points inside it.
struct GtSample {
  Box3D box;
  PointCloud points;
};

std::vector<GtSample> build_gt_database(std::span<const Scene> scenes);

/// One "sample_NNNNNN.bin" point file and one "sample_NNNNNN.txt" line
/// "x y z w l h yaw" per sample.
void write_gt_database(const std::filesystem::path& dir, std::span<const GtSample> samples);
std::vector<GtSample> read_gt_database(const std::filesystem::path& dir);

struct AugmentConfig {
  bool enabled = false;
  bool gt_sampling = true;
  int sample_count = 15;
  double translate_var = 0.25;   // per-axis variance of the per-box shift
  bool box_rotation = true;
  double box_yaw_range = kPi / 20;
  bool global_rotation = true;
  double global_rot_range = kPi / 2;
};

/// GT sampling onto the ground plane with collision rejection, per-box
/// translation and yaw jitter, then one global rotation about z.
Scene augment_scene(const Scene& scene, std::span<const GtSample> database, const GroundPlane& plane,
                    const AugmentConfig& cfg, std::mt19937_64& rng);

/// Rotates points and boxes about the z axis through the origin.
void rotate_scene(Scene& scene, double angle);

struct SyntheticConfig {
  int num_scenes = 20;
  int min_cars = 1;
  int max_cars = 3;
  double ground_z = -1.7;
  double ground_density = 20.0;   // points per square metre
  int car_points = 400;
  std::uint64_t seed = 7;
};

/// Flat ground plus cars of roughly 1.6 x 3.9 x 1.56 m with points on their
/// top and side faces, fully inside the x/y range of `vox`.
Scene make_synthetic_scene(const VoxelizerConfig& vox, const SyntheticConfig& cfg, std::size_t index);
std::vector<Scene> make_synthetic_dataset(const VoxelizerConfig& vox, const SyntheticConfig& cfg);

}  // namespace voxdet
