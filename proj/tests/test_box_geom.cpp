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
#include <random>

#include "voxdet/box_geom.hpp"

namespace voxdet {
namespace {

// Point-in-rectangle test written against the box definition directly: rotate
// the offset into the box frame and compare with the half extents.
bool inside(const Box3D& b, double x, double y) {
  const double dx = x - b.x, dy = y - b.y;
  const double u = std::cos(b.yaw) * dx + std::sin(b.yaw) * dy;
  const double v = -std::sin(b.yaw) * dx + std::cos(b.yaw) * dy;
  return std::abs(u) <= b.l / 2 && std::abs(v) <= b.w / 2;
}

double monte_carlo_iou(const Box3D& a, const Box3D& b, int samples, std::mt19937_64& rng) {
  const double ra = std::hypot(a.w, a.l) / 2, rb = std::hypot(b.w, b.l) / 2;
  const double x0 = std::min(a.x - ra, b.x - rb), x1 = std::max(a.x + ra, b.x + rb);
  const double y0 = std::min(a.y - ra, b.y - rb), y1 = std::max(a.y + ra, b.y + rb);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  int both = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = ux(rng), y = uy(rng);
    both += inside(a, x, y) && inside(b, x, y);
  }
  const double inter = (x1 - x0) * (y1 - y0) * both / samples;
  return inter / (a.w * a.l + b.w * b.l - inter);
}

Box3D random_box(std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), size(0.5, 4.0), yaw(-kPi, kPi), z(-1, 1);
  Box3D b;
  b.x = pos(rng);
  b.y = pos(rng);
  b.z = z(rng);
  b.w = size(rng);
  b.l = size(rng);
  b.h = size(rng);
  b.yaw = wrap_angle(yaw(rng));
  return b;
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(wrap_angle(0.25), 0.25);
}

TEST(Encode, IdentityGivesZeroResiduals) {
  const Box3D a{1, 2, -1, 1.6, 3.9, 1.56, 0.3};
  for (double r : encode(a, a)) EXPECT_EQ(r, 0.0);
}

TEST(Encode, DiagonalShiftGivesUnitResidual) {
  const Box3D a{0, 0, -1, 1.6, 3.9, 1.56, 0};
  const double d = std::sqrt(1.6 * 1.6 + 3.9 * 3.9);
  EXPECT_NEAR(d, 4.2154, 1e-4);
  Box3D g = a;
  g.x += d;
  const Residual r = encode(g, a);
  EXPECT_NEAR(r[0], 1.0, 1e-15);
  for (int j = 1; j < 7; ++j) EXPECT_EQ(r[j], 0.0);
}

TEST(Encode, DoubleWidthGivesLogTwo) {
  const Box3D a{0, 0, -1, 1.6, 3.9, 1.56, 0};
  Box3D g = a;
  g.w = 3.2;
  EXPECT_NEAR(encode(g, a)[3], std::log(2.0), 1e-15);
}

TEST(Encode, TranslationInvariant) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Box3D g = random_box(rng), a = random_box(rng);
    const Residual r0 = encode(g, a);
    g.x += 7.5;
    a.x += 7.5;
    g.y -= 3.25;
    a.y -= 3.25;
    g.z += 1.5;
    a.z += 1.5;
    const Residual r1 = encode(g, a);
    for (int j = 0; j < 7; ++j) EXPECT_NEAR(r0[j], r1[j], 1e-12);
  }
}

TEST(Decode, RoundTripsEncode) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Box3D g = random_box(rng), a = random_box(rng);
    const Box3D back = decode(encode(g, a), a, direction_bin(g.yaw));
    EXPECT_NEAR(back.x, g.x, 1e-12);
    EXPECT_NEAR(back.y, g.y, 1e-12);
    EXPECT_NEAR(back.z, g.z, 1e-12);
    EXPECT_NEAR(back.w, g.w, 1e-12);
    EXPECT_NEAR(back.l, g.l, 1e-12);
    EXPECT_NEAR(back.h, g.h, 1e-12);
    EXPECT_NEAR(wrap_angle(back.yaw - g.yaw), 0.0, 1e-12);
  }
}

TEST(Decode, FlippedBitAddsPi) {
  const Box3D a{0, 0, -1, 1.6, 3.9, 1.56, kPi / 2};
  const Box3D b = decode(Residual{}, a, 0);
  EXPECT_NEAR(b.yaw, -kPi / 2, 1e-15);
  const Box3D a0{0, 0, -1, 1.6, 3.9, 1.56, 0};
  EXPECT_NEAR(decode(Residual{}, a0, 0).yaw, kPi, 1e-15);
  EXPECT_EQ(decode(Residual{}, a0, 1).yaw, 0.0);
}

TEST(Decode, LogTwoHeightDoubles) {
  const Box3D a{0, 0, -1, 1.6, 3.9, 1.56, 0};
  Residual r{};
  r[5] = std::log(2.0);
  EXPECT_NEAR(decode(r, a, 1).h, 3.12, 1e-14);
}

TEST(DirectionBin, NonNegativeYawIsOne) {
  EXPECT_EQ(direction_bin(0.0), 1);
  EXPECT_EQ(direction_bin(1.0), 1);
  EXPECT_EQ(direction_bin(-1e-9), 0);
  EXPECT_EQ(direction_bin(kPi), 1);
}

TEST(BevIou, IdenticalBoxesGiveOne) {
  const Box3D a{1, 2, 0, 1.6, 3.9, 1.5, 0.7};
  EXPECT_NEAR(bev_iou(a, a), 1.0, 1e-12);
}

TEST(BevIou, HalfOverlappingUnitSquares) {
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  const Box3D b{0.5, 0, 0, 1, 1, 1, 0};
  EXPECT_NEAR(bev_iou(a, b), 1.0 / 3.0, 1e-12);
}

TEST(BevIou, DisjointBoxesGiveZero) {
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  const Box3D b{5, 5, 0, 1, 1, 1, 0.4};
  EXPECT_EQ(bev_iou(a, b), 0.0);
}

TEST(BevIou, DegenerateBoxGivesZero) {
  const Box3D a{0, 0, 0, 0, 1, 1, 0};
  const Box3D b{0, 0, 0, 1, 1, 1, 0};
  EXPECT_EQ(bev_iou(a, b), 0.0);
}

TEST(BevIou, RotatedSquareAgainstAnalyticOctagon) {
  // Unit square and its 45 degree rotation share a regular octagon of area
  // 2 (sqrt 2 - 1).
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  const Box3D b{0, 0, 0, 1, 1, 1, kPi / 4};
  const double inter = 2 * (std::sqrt(2.0) - 1);
  EXPECT_NEAR(bev_iou(a, b), inter / (2 - inter), 1e-12);
}

TEST(BevIou, SymmetricBoundedAndMatchesMonteCarlo) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    const Box3D a = random_box(rng, 1.5), b = random_box(rng, 1.5);
    const double ab = bev_iou(a, b), ba = bev_iou(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_NEAR(ab, monte_carlo_iou(a, b, 200000, rng), 5e-3);
  }
}

TEST(Iou3d, IdenticalBoxesGiveOne) {
  const Box3D a{1, 2, -1, 1.6, 3.9, 1.5, 0.7};
  EXPECT_NEAR(iou3d(a, a), 1.0, 1e-12);
}

TEST(Iou3d, HalfHeightShiftGivesOneThird) {
  const Box3D a{1, 2, -1, 1.6, 3.9, 1.5, 0.7};
  Box3D b = a;
  b.z += a.h / 2;
  EXPECT_NEAR(iou3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(Iou3d, NoVerticalOverlapGivesZero) {
  const Box3D a{1, 2, -1, 1.6, 3.9, 1.5, 0.7};
  Box3D b = a;
  b.z += 2;
  EXPECT_EQ(iou3d(a, b), 0.0);
}

TEST(IouMatrix, ParallelMatchesReference) {
  std::mt19937_64 rng(13);
  std::vector<Box3D> a, b;
  for (int i = 0; i < 40; ++i) a.push_back(random_box(rng));
  for (int i = 0; i < 17; ++i) b.push_back(random_box(rng));
  for (IouKind k : {IouKind::kBev, IouKind::k3d}) EXPECT_EQ(iou_matrix(a, b, k), iou_matrix_reference(a, b, k));
}

TEST(Anchors, TwoPerCellAtCellCenters) {
  AnchorGrid g(0, -2, 0.4, 0.4, 5, 3, AnchorConfig{});
  EXPECT_EQ(g.size(), 30u);
  const Box3D& a = g[g.ordinal(1, 2, 4)];
  EXPECT_NEAR(a.x, 1.8, 1e-12);
  EXPECT_NEAR(a.y, -1.0, 1e-12);
  EXPECT_EQ(a.z, -1.0);
  EXPECT_NEAR(a.yaw, kPi / 2, 1e-15);
  EXPECT_EQ(g[g.ordinal(0, 2, 4)].yaw, 0.0);
}

TEST(Nms, IdenticalBoxesKeepHigherScore) {
  const Box3D b{0, 0, 0, 1.6, 3.9, 1.5, 0};
  const std::vector<Detection> d = {{b, 0.8, 1}, {b, 0.9, 1}};
  const auto kept = oriented_nms(d, 0.05);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
}

TEST(Nms, DisjointBoxesBothKept) {
  const std::vector<Detection> d = {{{0, 0, 0, 1, 1, 1, 0}, 0.9, 1}, {{9, 9, 0, 1, 1, 1, 0}, 0.8, 1}};
  EXPECT_EQ(oriented_nms(d, 0.05).size(), 2u);
}

TEST(Nms, ChainKeepsEnds) {
  // a-b and b-c overlap with IoU 1/3, a-c are disjoint.
  const Box3D a{0, 0, 0, 1, 1, 1, 0}, b{0.5, 0, 0, 1, 1, 1, 0}, c{1.0 + 1e-9, 0, 0, 1, 1, 1, 0};
  ASSERT_EQ(bev_iou(a, c), 0.0);
  const std::vector<Detection> d = {{c, 0.7, 1}, {b, 0.8, 1}, {a, 0.9, 1}};
  const auto kept = oriented_nms(d, 0.05);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].score, 0.9);
  EXPECT_EQ(kept[1].score, 0.7);
}

TEST(Nms, EqualScoresKeepInputOrder) {
  const Box3D b{0, 0, 0, 1.6, 3.9, 1.5, 0};
  Box3D c = b;
  c.y = 0.1;
  const std::vector<Detection> d = {{c, 0.5, 0}, {b, 0.5, 1}};
  const auto kept = oriented_nms(d, 0.05);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].box.y, 0.1);
}

TEST(Nms, KeptSetHasNoPairAboveThreshold) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> s(0, 1);
  std::vector<Detection> d;
  for (int i = 0; i < 200; ++i) d.push_back({random_box(rng, 6.0), s(rng), 1});
  for (double thr : {0.0, 0.05, 0.3}) {
    const auto kept = oriented_nms(d, thr);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(bev_iou(kept[i].box, kept[j].box), thr);
  }
}

}  // namespace
}  // namespace voxdet
