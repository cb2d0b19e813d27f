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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "voxdet/kitti_io.hpp"

namespace voxdet {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "voxdet_test_kitti_io";
  fs::create_directories(dir);
  return dir / name;
}

// Calibration of KITTI training frame 000000.
constexpr const char* kCalib000000 =
    "P0: 7.215377e+02 0.000000e+00 6.095593e+02 0.000000e+00 0.000000e+00 7.215377e+02 "
    "1.728540e+02 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00\n"
    "P2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 0.000000e+00 7.215377e+02 "
    "1.728540e+02 2.163791e-01 0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03\n"
    "R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 "
    "-4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01\n"
    "Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 "
    "7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 "
    "-2.717806e-01\n"
    "Tr_imu_to_velo: 9.999976e-01 7.553071e-04 -2.035826e-03 -8.086759e-01 -7.854027e-04 "
    "9.998898e-01 -1.482298e-02 3.195559e-01 2.024406e-03 1.482454e-02 9.998881e-01 "
    "-7.997231e-01\n";

CalibMatrices calib000000() {
  std::istringstream in(kCalib000000);
  return parse_calib(in);
}

TEST(PointCloudCodec, HandEncodedGoldenFile) {
  // Little-endian float32 bytes of (1, 2, 3, 0.5) and (4, 5, 6, 0.1).
  const std::vector<unsigned char> bytes = {
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x00, 0x3f,
      0x00, 0x00, 0x80, 0x40, 0x00, 0x00, 0xa0, 0x40, 0x00, 0x00, 0xc0, 0x40, 0xcd, 0xcc, 0xcc, 0x3d};
  const fs::path p = scratch("golden.bin");
  {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const PointCloud c = read_point_cloud(p);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[0], (LidarPoint{1.0f, 2.0f, 3.0f, 0.5f}));
  EXPECT_EQ(c.points[1], (LidarPoint{4.0f, 5.0f, 6.0f, 0.1f}));
  EXPECT_EQ(encode_point_cloud(c), bytes);
}

TEST(PointCloudCodec, EmptyFileIsEmptyCloud) {
  const fs::path p = scratch("empty.bin");
  std::ofstream(p, std::ios::binary).close();
  EXPECT_TRUE(read_point_cloud(p).points.empty());
}

TEST(PointCloudCodec, SeventeenBytesIsTruncated) {
  const std::vector<unsigned char> bytes(17, 0);
  try {
    decode_point_cloud(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated record"), std::string::npos);
  }
}

TEST(PointCloudCodec, RejectsNonFinite) {
  PointCloud c;
  c.points.push_back({1, 2, std::numeric_limits<float>::quiet_NaN(), 0});
  const auto bytes = encode_point_cloud(c);
  EXPECT_THROW(decode_point_cloud(bytes), DataError);
}

TEST(PointCloudCodec, RoundTripArbitraryFinite) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1e6f, 1e6f);
  PointCloud c;
  for (int i = 0; i < 500; ++i) c.points.push_back({u(rng), u(rng), u(rng), u(rng)});
  const fs::path p = scratch("roundtrip.bin");
  write_point_cloud(p, c);
  EXPECT_EQ(read_point_cloud(p).points, c.points);
}

TEST(Labels, CanonicalCarLine) {
  std::istringstream in(
      "Car 0.00 0 1.57 614.24 181.78 727.31 284.77 1.57 1.73 4.15 1.00 1.75 13.22 1.62\n");
  const auto recs = parse_labels(in);
  ASSERT_EQ(recs.size(), 1u);
  const LabelRecord& r = recs[0];
  EXPECT_EQ(r.type, "Car");
  EXPECT_EQ(r.truncation, 0.0);
  EXPECT_EQ(r.occlusion, 0);
  EXPECT_EQ(r.alpha, 1.57);
  EXPECT_EQ(r.bbox, (std::array<double, 4>{614.24, 181.78, 727.31, 284.77}));
  EXPECT_EQ(r.height, 1.57);
  EXPECT_EQ(r.width, 1.73);
  EXPECT_EQ(r.length, 4.15);
  EXPECT_EQ(r.x, 1.00);
  EXPECT_EQ(r.y, 1.75);
  EXPECT_EQ(r.z, 13.22);
  EXPECT_EQ(r.rotation_y, 1.62);
  EXPECT_FALSE(r.score.has_value());
  EXPECT_FALSE(r.dont_care());
  EXPECT_NEAR(r.bbox_height(), 102.99, 1e-9);
}

TEST(Labels, ScoreAndDontCarePreserved) {
  std::istringstream in(
      "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\n"
      "Car 0.00 0 1.57 614.24 181.78 727.31 284.77 1.57 1.73 4.15 1.00 1.75 13.22 1.62 0.93\n");
  const auto recs = parse_labels(in);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_TRUE(recs[0].dont_care());
  ASSERT_TRUE(recs[1].score.has_value());
  EXPECT_EQ(*recs[1].score, 0.93);
}

TEST(Labels, EmptyInput) {
  std::istringstream in("");
  EXPECT_TRUE(parse_labels(in).empty());
}

TEST(Labels, FourteenFieldsNamesLine) {
  std::istringstream in(
      "Car 0.00 0 1.57 614.24 181.78 727.31 284.77 1.57 1.73 4.15 1.00 1.75 13.22 1.62\n"
      "Car 0.00 0 1.57 614.24 181.78 727.31 284.77 1.57 1.73 4.15 1.00 1.75 13.22\n");
  try {
    parse_labels(in);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Labels, FormatParseRoundTrip) {
  LabelRecord r;
  r.type = "Pedestrian";
  r.truncation = 0.25;
  r.occlusion = 2;
  r.alpha = -0.125;
  r.bbox = {10.5, 20.25, 30.75, 99.0};
  r.height = 1.8;
  r.width = 0.6;
  r.length = 0.9;
  r.x = -3.5;
  r.y = 1.7;
  r.z = 22.125;
  r.rotation_y = 2.5;
  r.score = 0.75;
  std::istringstream in(format_label(r) + "\n");
  const auto back = parse_labels(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].type, r.type);
  EXPECT_EQ(back[0].occlusion, 2);
  EXPECT_NEAR(back[0].z, r.z, 1e-9);
  EXPECT_NEAR(back[0].rotation_y, r.rotation_y, 1e-9);
  ASSERT_TRUE(back[0].score);
  EXPECT_NEAR(*back[0].score, 0.75, 1e-9);
}

TEST(Calib, ParsesKittiFile) {
  const CalibMatrices c = calib000000();
  EXPECT_EQ(c.rect[0], 9.999239e-01);
  EXPECT_EQ(c.velo_to_cam[11], -2.717806e-01);
  EXPECT_EQ(c.proj[3], 4.485728e+01);
  EXPECT_NO_THROW(validate_calib(c));
}

TEST(Calib, MissingKeyRejected) {
  std::istringstream in("R0_rect: 1 0 0 0 1 0 0 0 1\n");
  EXPECT_THROW(parse_calib(in), DataError);
}

TEST(Calib, NonOrthonormalRejected) {
  CalibMatrices c = canonical_calib();
  c.rect[0] = 1.1;
  EXPECT_THROW(validate_calib(c), DataError);
}

TEST(FrameConversion, IdentityExtrinsicsYawZero) {
  CalibMatrices c;
  c.rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  c.velo_to_cam = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  LabelRecord r;
  r.type = "Car";
  r.height = 1.5;
  r.width = 1.6;
  r.length = 3.9;
  r.x = 1;
  r.y = 2;
  r.z = 3;
  r.rotation_y = -kPi / 2;
  const Box3D b = camera_box_to_lidar(r, c);
  EXPECT_NEAR(b.yaw, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(b.x, 1.0);
  EXPECT_DOUBLE_EQ(b.y, 2.0);
  EXPECT_DOUBLE_EQ(b.z, 3.75);
  EXPECT_EQ(b.w, 1.6);
  EXPECT_EQ(b.l, 3.9);
  EXPECT_EQ(b.h, 1.5);
}

TEST(FrameConversion, KittiExtrinsicsScriptedOracle) {
  // Frozen from an independent numpy evaluation of inv(Tr) * inv(R0) * p plus h/2 on z.
  LabelRecord r;
  r.type = "Car";
  r.height = 1.5;
  r.width = 1.6;
  r.length = 3.9;
  r.x = 0;
  r.y = 1.65;
  r.z = 10;
  r.rotation_y = 0.3;
  const Box3D b = camera_box_to_lidar(r, calib000000());
  EXPECT_NEAR(b.x, 10.289598578802224, 1e-9);
  EXPECT_NEAR(b.y, 0.016707226551278365, 1e-9);
  EXPECT_NEAR(b.z, -0.8675906898021895, 1e-9);
  EXPECT_NEAR(b.yaw, -1.8707963267948966, 1e-12);
}

TEST(FrameConversion, RoundTripRandomBoxes) {
  const CalibMatrices c = calib000000();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-40, 40), dim(0.5, 5), yaw(-kPi + 1e-3, kPi - 1e-3);
  for (int i = 0; i < 1000; ++i) {
    Box3D b{pos(rng), pos(rng), pos(rng) / 10, dim(rng), dim(rng), dim(rng), yaw(rng)};
    const Box3D back = camera_box_to_lidar(lidar_box_to_camera(b, c), c);
    EXPECT_NEAR(back.x, b.x, 1e-6);
    EXPECT_NEAR(back.y, b.y, 1e-6);
    EXPECT_NEAR(back.z, b.z, 1e-6);
    EXPECT_NEAR(back.w, b.w, 1e-12);
    EXPECT_NEAR(back.l, b.l, 1e-12);
    EXPECT_NEAR(back.h, b.h, 1e-12);
    EXPECT_NEAR(back.yaw, b.yaw, 1e-6);
  }
}

TEST(FrameConversion, SingularCalibRejected) {
  CalibMatrices c = canonical_calib();
  c.rect = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  LabelRecord r;
  r.height = r.width = r.length = 1;
  EXPECT_THROW(camera_box_to_lidar(r, c), DataError);
}

TEST(Detections, WriteReadRoundTrip) {
  const CalibMatrices c = calib000000();
  std::vector<Detection> dets = {{{12.3, -1.2, -0.9, 1.6, 3.9, 1.5, 0.4}, 0.91, 1},
                                 {{25.0, 4.5, -1.1, 1.7, 4.2, 1.6, -2.0}, 0.55, 0}};
  const fs::path p = scratch("dets.txt");
  write_detections(p, dets, c);
  const auto recs = read_labels(p);
  ASSERT_EQ(recs.size(), 2u);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    ASSERT_TRUE(recs[i].score);
    EXPECT_NEAR(*recs[i].score, dets[i].score, 1e-3);
    const Box3D b = camera_box_to_lidar(recs[i], c);
    EXPECT_NEAR(b.x, dets[i].box.x, 1e-3);
    EXPECT_NEAR(b.y, dets[i].box.y, 1e-3);
    EXPECT_NEAR(b.z, dets[i].box.z, 1e-3);
    EXPECT_NEAR(b.w, dets[i].box.w, 1e-3);
    EXPECT_NEAR(b.l, dets[i].box.l, 1e-3);
    EXPECT_NEAR(b.h, dets[i].box.h, 1e-3);
    EXPECT_NEAR(wrap_angle(b.yaw - dets[i].box.yaw), 0.0, 1e-3);
  }
}

TEST(Detections, EmptySetWritesEmptyFile) {
  const fs::path p = scratch("none.txt");
  write_detections(p, {}, canonical_calib());
  EXPECT_EQ(fs::file_size(p), 0u);
}

TEST(Detections, RotationWrappedIntoRange) {
  // yaw 2.5 gives rotation_y = -2.5 - pi/2 = -4.0708, which wraps to 2.2124.
  const std::vector<Detection> dets = {{{10, 0, -1, 1.6, 3.9, 1.5, 2.5}, 0.5, 0}};
  const fs::path p = scratch("wrap.txt");
  write_detections(p, dets, canonical_calib());
  const auto recs = read_labels(p);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].rotation_y, -2.5 - kPi / 2 + 2 * kPi, 1e-3);
  EXPECT_GT(recs[0].rotation_y, -kPi);
  EXPECT_LE(recs[0].rotation_y, kPi);
}

TEST(Detections, LidarFormatRoundTrip) {
  const std::vector<Detection> dets = {{{1.25, -2.5, -0.75, 1.6, 3.9, 1.5, 0.3}, 0.875, 1}};
  const fs::path p = scratch("lidar.txt");
  write_lidar_detections(p, dets);
  const auto back = read_lidar_detections(p);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].box, dets[0].box);
  EXPECT_EQ(back[0].score, dets[0].score);
  EXPECT_EQ(back[0].direction, 1);
}

}  // namespace
}  // namespace voxdet
