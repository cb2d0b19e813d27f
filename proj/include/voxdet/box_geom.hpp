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
#include <cstddef>
#include <span>
#include <vector>

#include "voxdet/common.hpp"

namespace voxdet {

/// Oriented 3D box in the LiDAR frame. (x, y, z) is the volumetric center,
/// `l` runs along the heading direction, `w` across it, and yaw is measured
/// counterclockwise about +z from +x.
struct Box3D {
  double x = 0, y = 0, z = 0;
  double w = 1, l = 1, h = 1;
  double yaw = 0;

  bool operator==(const Box3D&) const = default;
};

struct Detection {
  Box3D box;
  double score = 0;
  int direction = 0;
};

struct Point2 {
  double x, y;
};

/// Counterclockwise BEV corners.
std::array<Point2, 4> bev_corners(const Box3D& b);

/// True if (px, py) lies inside the BEV rectangle of `b` (closed boundary).
bool bev_contains(const Box3D& b, double px, double py);

/// True if the 3D point lies inside `b` (closed boundary).
bool box_contains(const Box3D& b, double px, double py, double pz);

/// Area of intersection of two convex counterclockwise polygons.
double convex_intersection_area(std::span<const Point2> a, std::span<const Point2> b);

double bev_intersection(const Box3D& a, const Box3D& b);
double bev_iou(const Box3D& a, const Box3D& b);
double iou3d(const Box3D& a, const Box3D& b);

enum class IouKind { kBev, k3d };

/// Row-major |a| x |b| IoU matrix, OpenMP-parallel over rows.
std::vector<double> iou_matrix(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind);
/// Serial reference for iou_matrix.
std::vector<double> iou_matrix_reference(std::span<const Box3D> a, std::span<const Box3D> b,
                                         IouKind kind);

// ---------------------------------------------------------------------------
// Residual codec.

using Residual = std::array<double, 7>;

/// Direction bin of a yaw: 1 iff the wrapped yaw is >= 0.
int direction_bin(double yaw);

Residual encode(const Box3D& gt, const Box3D& anchor);

/// Inverse of encode. The regressed yaw is flipped by pi when its direction
/// bin disagrees with `direction`, then wrapped.
Box3D decode(const Residual& r, const Box3D& anchor, int direction);

// ---------------------------------------------------------------------------
// Anchors.

struct AnchorConfig {
  double w = 1.6, l = 3.9, h = 1.56;
  double z = -1.0;
  std::vector<double> rotations = {0.0, kPi / 2};
};

/// Anchors tiled over a BEV grid, `rotations.size()` per cell. Anchor ordinal
/// (a * ny + iy) * nx + ix matches the flat layout of a (1, A, ny, nx) map.
class AnchorGrid {
 public:
  AnchorGrid(double x_min, double y_min, double cell_x, double cell_y, int nx, int ny,
             AnchorConfig cfg);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int per_cell() const { return static_cast<int>(cfg_.rotations.size()); }
  std::size_t size() const { return anchors_.size(); }
  const Box3D& operator[](std::size_t i) const { return anchors_[i]; }
  std::span<const Box3D> boxes() const { return anchors_; }
  std::size_t ordinal(int a, int iy, int ix) const {
    return (static_cast<std::size_t>(a) * ny_ + iy) * nx_ + ix;
  }

 private:
  int nx_, ny_;
  AnchorConfig cfg_;
  std::vector<Box3D> anchors_;
};

/// Greedy suppression in descending score order using BEV IoU; equal scores
/// keep their input order. Returns kept detections in that order.
std::vector<Detection> oriented_nms(std::span<const Detection> dets, double iou_threshold = 0.05);

}  // namespace voxdet
