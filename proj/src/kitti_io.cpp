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

#include "voxdet/kitti_io.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

namespace voxdet {

static_assert(std::endian::native == std::endian::little, "point files are little-endian");

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

Mat3 rect_of(const CalibMatrices& c) {
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(c.rect.data());
}

Mat3 rot_of(const CalibMatrices& c) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = c.velo_to_cam[i * 4 + j];
  return r;
}

Vec3 trans_of(const CalibMatrices& c) {
  return {c.velo_to_cam[3], c.velo_to_cam[7], c.velo_to_cam[11]};
}

bool orthonormal(const Mat3& m, double tol) {
  return ((m * m.transpose()) - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

Mat3 checked_inverse(const Mat3& m, const char* what) {
  if (std::abs(m.determinant()) < 1e-9) throw DataError(std::string("singular ") + what);
  return m.inverse();
}

}  // namespace

PointCloud decode_point_cloud(std::span<const unsigned char> bytes) {
  constexpr std::size_t kRecord = 4 * sizeof(float);
  if (bytes.size() % kRecord != 0) throw DataError("truncated record");
  PointCloud cloud;
  cloud.points.resize(bytes.size() / kRecord);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + i * kRecord, kRecord);
    for (float f : v) {
      if (!std::isfinite(f)) throw DataError("non-finite value in record " + std::to_string(i));
    }
    cloud.points[i] = {v[0], v[1], v[2], v[3]};
  }
  return cloud;
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  try {
    return decode_point_cloud(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_point_cloud(const PointCloud& cloud) {
  std::vector<unsigned char> out(cloud.points.size() * 16);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const LidarPoint& p = cloud.points[i];
    const float v[4] = {p.x, p.y, p.z, p.intensity};
    std::memcpy(out.data() + i * 16, v, 16);
  }
  return out;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path, true);
  const auto bytes = encode_point_cloud(cloud);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

CalibMatrices canonical_calib() {
  CalibMatrices c;
  c.rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  c.velo_to_cam = {0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0};
  c.proj = {721.5377, 0, 609.5593, 44.85728, 0, 721.5377, 172.854, 0.2163791, 0, 0, 1, 0.002745884};
  return c;
}

void validate_calib(const CalibMatrices& calib) {
  if (!orthonormal(rect_of(calib), 1e-4)) throw DataError("R0_rect is not orthonormal");
  if (!orthonormal(rot_of(calib), 1e-4))
    throw DataError("Tr_velo_to_cam rotation is not orthonormal");
}

CalibMatrices parse_calib(std::istream& in) {
  std::map<std::string, std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::istringstream ss(line.substr(colon + 1));
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof()) throw DataError("calib line " + std::to_string(line_no) + ": bad number");
    rows[line.substr(0, colon)] = std::move(vals);
  }
  auto take = [&](const char* key, std::size_t n, double* dst) {
    auto it = rows.find(key);
    if (it == rows.end()) throw DataError(std::string("calib missing ") + key);
    if (it->second.size() != n)
      throw DataError(std::string("calib ") + key + " expects " + std::to_string(n) + " values");
    std::copy(it->second.begin(), it->second.end(), dst);
  };
  CalibMatrices c;
  take("P2", 12, c.proj.data());
  take("R0_rect", 9, c.rect.data());
  take("Tr_velo_to_cam", 12, c.velo_to_cam.data());
  validate_calib(c);
  return c;
}

CalibMatrices read_calib(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_calib(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<LabelRecord> parse_labels(std::istream& in) {
  std::vector<LabelRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> f;
    for (std::string tok; ss >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    auto fail = [&](const std::string& why) {
      return DataError("line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 15 && f.size() != 16)
      throw fail("expected 15 or 16 fields, got " + std::to_string(f.size()));
    auto num = [&](std::size_t i) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(f[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f[i].size() || !std::isfinite(v)) throw fail("bad number '" + f[i] + "'");
      return v;
    };
    LabelRecord r;
    r.type = f[0];
    r.truncation = num(1);
    const double occ = num(2);
    if (occ != std::floor(occ)) throw fail("occlusion must be an integer");
    r.occlusion = static_cast<int>(occ);
    r.alpha = num(3);
    for (int i = 0; i < 4; ++i) r.bbox[i] = num(4 + i);
    r.height = num(8);
    r.width = num(9);
    r.length = num(10);
    r.x = num(11);
    r.y = num(12);
    r.z = num(13);
    r.rotation_y = num(14);
    if (f.size() == 16) r.score = num(15);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_labels(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_label(const LabelRecord& r) {
  std::string s = r.type;
  s += ' ' + fmt("%.2f", r.truncation);
  s += ' ' + std::to_string(r.occlusion);
  s += ' ' + fmt("%.6f", r.alpha);
  for (double b : r.bbox) s += ' ' + fmt("%.2f", b);
  for (double v : {r.height, r.width, r.length, r.x, r.y, r.z, r.rotation_y})
    s += ' ' + fmt("%.6f", v);
  if (r.score) s += ' ' + fmt("%.6f", *r.score);
  return s;
}

Box3D camera_box_to_lidar(const LabelRecord& label, const CalibMatrices& calib) {
  const Mat3 rect_inv = checked_inverse(rect_of(calib), "R0_rect");
  const Mat3 rot_inv = checked_inverse(rot_of(calib), "Tr_velo_to_cam");
  const Vec3 cam = rect_inv * Vec3(label.x, label.y, label.z);
  const Vec3 velo = rot_inv * (cam - trans_of(calib));
  Box3D b;
  b.x = velo.x();
  b.y = velo.y();
  b.z = velo.z() + label.height / 2;
  b.w = label.width;
  b.l = label.length;
  b.h = label.height;
  b.yaw = wrap_angle(-label.rotation_y - kPi / 2);
  return b;
}

LabelRecord lidar_box_to_camera(const Box3D& box, const CalibMatrices& calib) {
  const Vec3 cam = rot_of(calib) * Vec3(box.x, box.y, box.z - box.h / 2) + trans_of(calib);
  const Vec3 rect = rect_of(calib) * cam;
  LabelRecord r;
  r.type = "Car";
  r.height = box.h;
  r.width = box.w;
  r.length = box.l;
  r.x = rect.x();
  r.y = rect.y();
  r.z = rect.z();
  r.rotation_y = wrap_angle(-box.yaw - kPi / 2);
  r.alpha = wrap_angle(r.rotation_y - std::atan2(r.x, r.z));
  return r;
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> dets,
                      const CalibMatrices& calib) {
  auto out = open_out(path);
  for (const Detection& d : dets) {
    LabelRecord r = lidar_box_to_camera(d.box, calib);
    r.truncation = -1;
    r.occlusion = -1;
    r.score = d.score;
    out << format_label(r) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::string format_detection(const Detection& d) {
  const Box3D& b = d.box;
  std::string s;
  for (double v : {b.x, b.y, b.z, b.w, b.l, b.h, b.yaw}) s += fmt("%.6f", v) + ' ';
  s += fmt("%.6f", d.score);
  return s;
}

std::vector<Detection> parse_detections(std::istream& in) {
  std::vector<Detection> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty() && ss.eof()) continue;
    if (!ss.eof() || v.size() != 8)
      throw DataError("line " + std::to_string(line_no) + ": expected 8 numeric fields");
    Detection d;
    d.box = {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
    d.score = v[7];
    d.direction = direction_bin(v[6]);
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> read_lidar_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_detections(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_lidar_detections(const std::filesystem::path& path, std::span<const Detection> dets) {
  auto out = open_out(path);
  for (const Detection& d : dets) out << format_detection(d) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace voxdet
