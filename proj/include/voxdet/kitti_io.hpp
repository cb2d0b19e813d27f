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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxdet/box_geom.hpp"

namespace voxdet {

struct LidarPoint {
  float x = 0, y = 0, z = 0, intensity = 0;
  bool operator==(const LidarPoint&) const = default;
};

struct PointCloud {
  std::vector<LidarPoint> points;
};

/// Decodes raw little-endian float32 quadruples. Throws DataError on a
/// truncated file or a non-finite value (naming the record index).
PointCloud read_point_cloud(const std::filesystem::path& path);
PointCloud decode_point_cloud(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_point_cloud(const PointCloud& cloud);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

struct CalibMatrices {
  std::array<double, 9> rect{};          // R0_rect, row-major 3x3
  std::array<double, 12> velo_to_cam{};  // Tr_velo_to_cam, row-major 3x4
  std::array<double, 12> proj{};         // P2, row-major 3x4
};

/// Identity rectification and the axis permutation x_cam = -y, y_cam = -z,
/// z_cam = x. Used when a frame ships without a calibration file; IoU-based
/// evaluation is invariant to the choice of rigid calibration.
CalibMatrices canonical_calib();

/// Parses a KITTI calibration file (keys P2, R0_rect, Tr_velo_to_cam).
CalibMatrices parse_calib(std::istream& in);
CalibMatrices read_calib(const std::filesystem::path& path);
/// Throws DataError unless both rotations are orthonormal within 1e-4.
void validate_calib(const CalibMatrices& calib);

struct LabelRecord {
  std::string type;
  double truncation = 0;
  int occlusion = 0;
  double alpha = 0;
  std::array<double, 4> bbox{};  // left, top, right, bottom (px)
  double height = 0, width = 0, length = 0;
  double x = 0, y = 0, z = 0;  // camera frame, bottom-face center
  double rotation_y = 0;
  std::optional<double> score;

  bool dont_care() const { return type == "DontCare"; }
  double bbox_height() const { return bbox[3] - bbox[1]; }
};

/// One record per non-blank line. Throws DataError("line N: ...") on the first
/// line with a field count other than 15 or 16 or an unparseable field.
std::vector<LabelRecord> parse_labels(std::istream& in);
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
std::string format_label(const LabelRecord& rec);

Box3D camera_box_to_lidar(const LabelRecord& label, const CalibMatrices& calib);
/// Inverse of camera_box_to_lidar; fills type "Car", location, dims,
/// rotation_y and alpha. Image fields are zero.
LabelRecord lidar_box_to_camera(const Box3D& box, const CalibMatrices& calib);

/// KITTI result format (16 fields, camera frame).
void write_detections(const std::filesystem::path& path, std::span<const Detection> dets,
                      const CalibMatrices& calib);

/// LiDAR-frame detection lines "x y z w l h theta score".
std::string format_detection(const Detection& d);
std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> read_lidar_detections(const std::filesystem::path& path);
void write_lidar_detections(const std::filesystem::path& path, std::span<const Detection> dets);

}  // namespace voxdet
