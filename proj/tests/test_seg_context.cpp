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
#include <sstream>

#include "test_util.hpp"
#include "voxdet/augment.hpp"
#include "voxdet/seg_context.hpp"

namespace voxdet {
namespace {

using testing::directional_gradient_error;
using testing::gradient_error;
using testing::probe;
using testing::random_tensor;

// The output head starts near the class prior, where its gradients are tiny
// relative to finite-difference noise; randomise it for gradient checks.
void randomise_head(nn::ParamStore& store, const std::string& name, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  for (const char* part : {".weight", ".bias"}) {
    nn::Tensor t = store.get(name + part);
    for (double& v : t.data()) v = u(rng);
  }
}

VoxelizerConfig toy_voxels() {
  VoxelizerConfig cfg;
  cfg.range_min = {0.0, -5.0, -3.0};
  cfg.range_max = {8.8, 5.0, 1.0};
  return cfg;
}

SparseVoxelGrid empty_grid(const VoxelizerConfig& cfg) {
  SparseVoxelGrid g;
  g.shape = cfg.grid_shape();
  g.channels = 4;
  return g;
}

TEST(MaskKind, ParseAndPrint) {
  EXPECT_EQ(parse_mask_kind("voxel_type"), MaskKind::kVoxelType);
  EXPECT_EQ(parse_mask_kind("box_type"), MaskKind::kBoxType);
  EXPECT_EQ(to_string(MaskKind::kVoxelType), "voxel_type");
  EXPECT_EQ(to_string(MaskKind::kBoxType), "box_type");
  EXPECT_THROW(parse_mask_kind("voxel"), UsageError);
}

TEST(BevGeometry, DefaultAndToy) {
  const BevGeometry d = bev_geometry(VoxelizerConfig{}, 8);
  EXPECT_EQ(d.nx, 176);
  EXPECT_EQ(d.ny, 200);
  EXPECT_DOUBLE_EQ(d.cell_x, 0.4);
  EXPECT_DOUBLE_EQ(d.center_x(0), 0.2);
  EXPECT_DOUBLE_EQ(d.center_y(0), -39.8);
  const BevGeometry t = bev_geometry(toy_voxels(), 8);
  EXPECT_EQ(t.nx, 22);
  EXPECT_EQ(t.ny, 25);
}

TEST(MakeMask, NoBoxesAllBackground) {
  const VoxelizerConfig cfg = toy_voxels();
  for (MaskKind k : {MaskKind::kBoxType, MaskKind::kVoxelType}) {
    const SemanticMask m = make_mask(empty_grid(cfg), cfg, {}, k);
    EXPECT_EQ(m.height, 25);
    EXPECT_EQ(m.width, 22);
    EXPECT_EQ(m.count(), 0u);
  }
}

TEST(MakeMask, BoxTypeTenByFour) {
  // 4.0 m along x and 1.6 m along y, centred on a cell corner.
  const VoxelizerConfig def;
  const std::vector<Box3D> boxes = {{20.0, 0.0, -1.0, 1.6, 4.0, 1.5, 0.0}};
  const SemanticMask m = make_mask(empty_grid(def), def, boxes, MaskKind::kBoxType);
  EXPECT_EQ(m.count(), 40u);
  for (int iy = 98; iy < 102; ++iy)
    for (int ix = 45; ix < 55; ++ix) EXPECT_TRUE(m.foreground(iy, ix)) << iy << "," << ix;

  const VoxelizerConfig toy = toy_voxels();
  const std::vector<Box3D> toy_boxes = {{4.0, 0.2, -1.0, 1.6, 4.0, 1.5, 0.0}};
  EXPECT_EQ(make_mask(empty_grid(toy), toy, toy_boxes, MaskKind::kBoxType).count(), 40u);
  // Rotating by 90 degrees swaps the footprint to 4 x 10.
  const std::vector<Box3D> turned = {{20.0, 0.0, -1.0, 1.6, 4.0, 1.5, kPi / 2}};
  const SemanticMask r = make_mask(empty_grid(def), def, turned, MaskKind::kBoxType);
  EXPECT_EQ(r.count(), 40u);
  EXPECT_TRUE(r.foreground(95, 49));
  EXPECT_FALSE(r.foreground(99, 45));
}

TEST(MakeMask, VoxelTypeEmptyGridIsBackground) {
  const VoxelizerConfig cfg = toy_voxels();
  const std::vector<Box3D> boxes = {{4.0, 0.2, -1.0, 1.6, 4.0, 1.5, 0.0}};
  EXPECT_EQ(make_mask(empty_grid(cfg), cfg, boxes, MaskKind::kVoxelType).count(), 0u);
}

TEST(MakeMask, VoxelTypeNeedsVoxelInsideBox) {
  const VoxelizerConfig cfg = toy_voxels();
  const std::vector<Box3D> boxes = {{4.0, 0.2, -1.0, 1.6, 4.0, 1.5, 0.0}};
  PointCloud c;
  c.points.push_back({4.1f, 0.3f, -1.0f, 0.5f});  // inside the box
  c.points.push_back({7.5f, 3.0f, -1.0f, 0.5f});  // outside
  const SemanticMask m = make_mask(voxelize(c, cfg), cfg, boxes, MaskKind::kVoxelType);
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m.foreground(static_cast<int>((0.3 + 5) / 0.4), static_cast<int>(4.1 / 0.4)));
}

TEST(MakeMaskProperties, VoxelTypeWithinBoxType) {
  const VoxelizerConfig cfg = toy_voxels();
  SyntheticConfig syn;
  syn.num_scenes = 30;
  syn.seed = 21;
  for (const Scene& s : make_synthetic_dataset(cfg, syn)) {
    const SparseVoxelGrid g = voxelize(s.cloud, cfg);
    const SemanticMask v = make_mask(g, cfg, s.boxes, MaskKind::kVoxelType);
    const SemanticMask b = make_mask(g, cfg, s.boxes, MaskKind::kBoxType);
    EXPECT_GT(v.count(), 0u);
    for (std::size_t i = 0; i < v.labels.size(); ++i)
      if (v.labels[i]) {
        EXPECT_TRUE(b.labels[i]);
      }
  }
}

TEST(Masks, ThresholdIouAndPgm) {
  const nn::Tensor p({1, 1, 2, 3}, std::vector<double>{0.1, 0.5, 0.9, 0.49, 0.51, 0.0});
  const SemanticMask m = threshold_mask(p);
  // Strictly above the threshold counts as foreground.
  EXPECT_EQ(m.labels, (std::vector<std::uint8_t>{0, 0, 1, 0, 1, 0}));
  SemanticMask other = m;
  other.labels = {0, 1, 0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(mask_iou(m, other), 1.0 / 4.0);
  SemanticMask empty = m;
  empty.labels.assign(6, 0);
  EXPECT_EQ(mask_iou(empty, empty), 1.0);

  std::ostringstream out;
  write_pgm(out, m);
  EXPECT_EQ(out.str(), std::string("P5\n3 2\n255\n\0\0\xff\0\xff\0", 17));
  std::ostringstream prob;
  write_pgm(prob, p);
  EXPECT_EQ(prob.str().substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(static_cast<unsigned char>(prob.str()[13]), 230);
}

TEST(SegLoss, ClosedForms) {
  SemanticMask mask;
  mask.height = 1;
  mask.width = 2;
  mask.labels = {1, 0};
  EXPECT_NEAR(seg_loss(nn::Tensor({1, 1, 1, 2}, 0.5), mask).item(), std::log(2.0), 1e-15);
  EXPECT_LE(seg_loss(nn::Tensor({1, 1, 1, 2}, std::vector<double>{1.0, 0.0}), mask).item(), 1e-6);
  // Both cells wrong and fully confident: each term is -ln(1e-7).
  const double worst = seg_loss(nn::Tensor({1, 1, 1, 2}, std::vector<double>{0.0, 1.0}), mask).item();
  EXPECT_NEAR(worst, (-std::log(1e-7) - std::log(1e-7)) / 2, 1e-9);
  // One cell right, one wrong.
  const double half = seg_loss(nn::Tensor({1, 1, 1, 2}, std::vector<double>{1.0, 1.0}), mask).item();
  EXPECT_NEAR(half, (-std::log(1 - 1e-7) - std::log(1e-7)) / 2, 1e-9);
  EXPECT_THROW(seg_loss(nn::Tensor({1, 1, 2, 1}, 0.5), mask), UsageError);
}

TEST(SegLoss, Gradients) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const int h = 2 + rep, w = 3 + rep;
    nn::Tensor p = random_tensor({1, 1, h, w}, rng, 0.05, 0.95);
    SemanticMask mask;
    mask.height = h;
    mask.width = w;
    for (int i = 0; i < h * w; ++i) mask.labels.push_back(rng() % 2);
    EXPECT_LT(gradient_error([&] { return seg_loss(p, mask); }, {p}), 1e-4);
  }
}

TEST(Fuse, Examples) {
  std::mt19937_64 rng(2);
  const nn::Tensor f = random_tensor({1, 3, 2, 2}, rng, -1, 1, false);
  const nn::Tensor r0 = fuse(f, nn::Tensor({1, 1, 2, 2}, 0.0));
  const nn::Tensor r1 = fuse(f, nn::Tensor({1, 1, 2, 2}, 1.0));
  for (std::int64_t i = 0; i < f.numel(); ++i) {
    EXPECT_EQ(r0.data()[i], f.data()[i]);
    EXPECT_EQ(r1.data()[i], 2 * f.data()[i]);
  }
  const nn::Tensor m({1, 1, 2, 2}, std::vector<double>{0.5, 0.0, 0.25, 1.0});
  const nn::Tensor r = fuse(f, m);
  for (std::int64_t c = 0; c < 3; ++c) {
    EXPECT_EQ(r.at(0, c, 0, 0), 1.5 * f.at(0, c, 0, 0));
    EXPECT_EQ(r.at(0, c, 0, 1), f.at(0, c, 0, 1));
    EXPECT_EQ(r.at(0, c, 1, 0), 1.25 * f.at(0, c, 1, 0));
    EXPECT_EQ(r.at(0, c, 1, 1), 2.0 * f.at(0, c, 1, 1));
  }
  EXPECT_THROW(fuse(f, nn::Tensor({1, 1, 2, 3})), UsageError);
}

TEST(FuseProperties, MonotoneInMask) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    const nn::Tensor f = random_tensor({1, 2, 1, 1}, rng, -2, 2, false);
    const double a = u(rng), b = u(rng);
    const nn::Tensor ra = fuse(f, nn::Tensor({1, 1, 1, 1}, std::min(a, b)));
    const nn::Tensor rb = fuse(f, nn::Tensor({1, 1, 1, 1}, std::max(a, b)));
    for (int c = 0; c < 2; ++c) EXPECT_LE(std::abs(ra.data()[c]), std::abs(rb.data()[c]));
  }
}

TEST(Fuse, GradientsThroughBothFactors) {
  std::mt19937_64 rng(4);
  const std::vector<nn::Shape> shapes = {{1, 1, 2, 2}, {1, 4, 3, 5}, {2, 2, 4, 4}, {1, 8, 2, 7}, {1, 3, 6, 6}};
  for (const auto& s : shapes) {
    nn::Tensor f = random_tensor(s, rng);
    nn::Tensor m = random_tensor({s[0], 1, s[2], s[3]}, rng, 0, 1);
    EXPECT_LT(gradient_error([&] { return probe(fuse(f, m)); }, {f, m}), 1e-4);
  }
}

TEST(SegmentationBranch, ShapeRangeAndSmallGradient) {
  // The graph is piecewise smooth; this seed keeps every ReLU and max-pool
  // boundary farther than the finite-difference step from its input.
  std::mt19937_64 rng(17);
  nn::ParamStore store(5);
  const SegmentationBranch seg(store, "seg", 4, 3, {});
  randomise_head(store, "seg.head", rng);
  // Large enough that the quarter-scale batch statistics use 12 cells.
  nn::Tensor x = random_tensor({1, 4, 16, 12}, rng);
  const nn::Tensor m = seg(x, true);
  EXPECT_EQ(m.shape(), (nn::Shape{1, 1, 16, 12}));
  for (double v : m.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  std::vector<nn::Tensor> inputs = store.trainable();
  inputs.push_back(x);
  EXPECT_LT(gradient_error([&] { return probe(seg(x, true)); }, inputs), 1e-4);
}

TEST(SegmentationBranch, OddSizesKeepShape) {
  nn::ParamStore store(6);
  const SegmentationBranch seg(store, "seg", 2, 2, {});
  for (auto [h, w] : {std::pair{25, 22}, {7, 9}, {5, 5}}) {
    const nn::Tensor m = seg(nn::Tensor({1, 2, h, w}, 0.3), false);
    EXPECT_EQ(m.shape(), (nn::Shape{1, 1, h, w}));
  }
}

TEST(SegmentationBranch, FullWidthGradientCheck) {
  // 128-channel branch on a 1x128x16x16 input, checked along random directions.
  std::mt19937_64 rng(7);
  nn::ParamStore store(7);
  const SegmentationBranch seg(store, "seg", 128, 128, {});
  randomise_head(store, "seg.head", rng);
  nn::Tensor x = random_tensor({1, 128, 16, 16}, rng);
  std::vector<nn::Tensor> inputs = store.trainable();
  inputs.push_back(x);
  EXPECT_LT(directional_gradient_error([&] { return probe(seg(x, true)); }, inputs, 4, 1), 1e-4);
}

TEST(DetectionBranch, ShapeZeroAndGradient) {
  std::mt19937_64 rng(8);
  nn::ParamStore store(8);
  const DetectionBranch det(store, "det", 4, 3, {});
  for (bool train : {true, false}) {
    const nn::Tensor z = det(nn::Tensor({1, 4, 6, 5}, 0.0), train);
    EXPECT_EQ(z.shape(), (nn::Shape{1, 8, 6, 5}));
    for (double v : z.data()) EXPECT_EQ(v, 0.0);
  }
  nn::Tensor x = random_tensor({1, 4, 6, 6}, rng);
  std::vector<nn::Tensor> inputs = store.trainable();
  inputs.push_back(x);
  EXPECT_LT(gradient_error([&] { return probe(det(x, true)); }, inputs), 1e-4);
}

TEST(SemanticContextEncoder, OutputsAndDeterminism) {
  std::mt19937_64 rng(9);
  const nn::Tensor x = random_tensor({1, 6, 9, 7}, rng, -1, 1, false);
  nn::ParamStore s1(3), s2(3);
  const SemanticContextEncoder a(s1, "sce", 6, 4, 4, {});
  const SemanticContextEncoder b(s2, "sce", 6, 4, 4, {});
  EXPECT_EQ(a.out_channels(), 12);
  const SceOutput oa = a(x, true), ob = b(x, true);
  EXPECT_EQ(oa.features.shape(), (nn::Shape{1, 12, 9, 7}));
  EXPECT_EQ(oa.probability.shape(), (nn::Shape{1, 1, 9, 7}));
  EXPECT_EQ(oa.fused.shape(), (nn::Shape{1, 12, 9, 7}));
  EXPECT_TRUE(std::equal(oa.fused.data().begin(), oa.fused.data().end(), ob.fused.data().begin()));
  // Channels 0..5 carry the input unchanged before reweighting.
  for (std::int64_t y = 0; y < 9; ++y)
    for (std::int64_t c = 0; c < 6; ++c)
      EXPECT_NEAR(oa.fused.at(0, c, y, 2), (1 + oa.probability.at(0, 0, y, 2)) * x.at(0, c, y, 2),
                  1e-12);
}

TEST(SemanticContextEncoder, EndToEndGradient) {
  std::mt19937_64 rng(10);
  nn::ParamStore store(10);
  const SemanticContextEncoder sce(store, "sce", 3, 2, 2, {});
  randomise_head(store, "sce.seg.head", rng);
  nn::Tensor x = random_tensor({1, 3, 6, 5}, rng);
  SemanticMask mask;
  mask.height = 6;
  mask.width = 5;
  for (int i = 0; i < 30; ++i) mask.labels.push_back(i % 3 == 0);
  std::vector<nn::Tensor> inputs = store.trainable();
  inputs.push_back(x);
  EXPECT_LT(gradient_error(
                [&] {
                  const SceOutput o = sce(x, true);
                  const nn::Tensor terms[2] = {probe(o.fused), seg_loss(o.probability, mask)};
                  const double w[2] = {1.0, 0.5};
                  return nn::weighted_sum(terms, w);
                },
                inputs),
            1e-4);
}

}  // namespace
}  // namespace voxdet
