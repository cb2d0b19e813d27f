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

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "cli_fixtures.hpp"
#include "cli_runner.hpp"
#include "voxdet/config.hpp"
#include "voxdet/network.hpp"

namespace voxdet {
namespace {

using testing::run_cli;
using testing::ScratchDir;
using testing::slurp;
using testing::write_text;

TEST(Cli, VoxelizeGoldenTwoPointCloud) {
  ScratchDir dir("cli_golden");
  PointCloud c;
  c.points = {{10.0f, 0.0f, -1.0f, 0.5f}, {20.0f, 5.0f, -0.5f, 0.25f}};
  write_point_cloud(dir / "two.bin", c);
  const auto r = run_cli("voxelize --input " + (dir / "two.bin") + " --output -");
  EXPECT_EQ(r.exit_code, 0);
  // x / 0.05, (y + 40) / 0.05, (z + 3) / 0.1.
  EXPECT_EQ(r.out,
            "shape 1408 1600 40\n"
            "channels 4\n"
            "sites 2\n"
            "200 800 20 10 0 -1 0.5\n"
            "400 900 25 20 5 -0.5 0.25\n");
  EXPECT_EQ(run_cli("voxelize --input " + (dir / "two.bin") + " --output " + (dir / "two.dump")).exit_code, 0);
  EXPECT_EQ(slurp(dir.path / "two.dump"), r.out);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli("").exit_code, 1);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 1);
  EXPECT_EQ(run_cli("voxelize").exit_code, 1);
  EXPECT_EQ(run_cli("--set no.such.key=1 config").exit_code, 1);
  EXPECT_EQ(run_cli("--set optim.lr=fast config").exit_code, 1);
  EXPECT_EQ(run_cli("--preset huge config").exit_code, 1);
  EXPECT_EQ(run_cli("--set sce.bev_stride=4 config").exit_code, 1);
  EXPECT_EQ(run_cli("bench --repeat 0 --no-timing").exit_code, 1);
  EXPECT_EQ(run_cli("--help").exit_code, 0);
}

TEST(Cli, DataErrorsExitTwo) {
  ScratchDir dir("cli_data");
  EXPECT_EQ(run_cli("voxelize --input /nonexistent/cloud.bin").exit_code, 2);
  write_text(dir.path / "short.bin", std::string(10, '\0'));
  EXPECT_EQ(run_cli("voxelize --input " + (dir / "short.bin")).exit_code, 2);
  write_text(dir.path / "bad.txt", "1 2 3\n");
  EXPECT_EQ(run_cli("nms --input " + (dir / "bad.txt")).exit_code, 2);
  EXPECT_EQ(run_cli("--config /nonexistent/x.cfg config").exit_code, 2);
  EXPECT_EQ(run_cli("eval --gt-dir /nonexistent --det-dir /nonexistent").exit_code, 2);
  write_text(dir.path / "garbage.ckpt", "not a checkpoint");
  PointCloud c;
  c.points = {{10.0f, 0.0f, -1.0f, 0.5f}};
  write_point_cloud(dir / "one.bin", c);
  EXPECT_EQ(run_cli("--preset toy forward --input " + (dir / "one.bin") + " --checkpoint " + (dir / "garbage.ckpt"))
                .exit_code,
            2);
}

TEST(Cli, NumericFailureExitsThree) {
  // Huge box regressions overflow exp() when the sizes are decoded.
  ScratchDir dir("cli_numeric");
  const RunConfig cfg = RunConfig::preset("toy");
  Detector model(cfg.model);
  nn::Tensor box_bias = model.params().get("head.part1.box.bias");
  for (double& v : box_bias.data()) v = 1000;
  nn::Tensor cls_bias = model.params().get("head.part1.cls.bias");
  for (double& v : cls_bias.data()) v = 10;
  model.params().save(dir.path / "bad.ckpt");
  PointCloud c;
  c.points = {{2.0f, 0.0f, -1.0f, 0.5f}};
  write_point_cloud(dir / "one.bin", c);
  const auto r = run_cli("--preset toy forward --input " + (dir / "one.bin") + " --checkpoint " +
                         (dir / "bad.ckpt") + " --output -");
  EXPECT_EQ(r.exit_code, 3);
}

TEST(Cli, ConfigDumpRoundTrip) {
  ScratchDir dir("cli_config");
  const auto dump = run_cli("--preset toy --set optim.lr=0.001 config");
  ASSERT_EQ(dump.exit_code, 0);
  write_text(dir.path / "run.cfg", dump.out);
  const auto again = run_cli("--config " + (dir / "run.cfg") + " config");
  EXPECT_EQ(again.exit_code, 0);
  EXPECT_EQ(again.out, dump.out);
  EXPECT_NE(dump.out.find("optim.lr = 0.001\n"), std::string::npos);
  const auto defaults = run_cli("config");
  EXPECT_EQ(defaults.out, RunConfig{}.dump());
}

TEST(Cli, EvalPerfectDetections) {
  ScratchDir dir("cli_eval");
  std::filesystem::create_directories(dir.path / "gt");
  std::filesystem::create_directories(dir.path / "det");
  const std::vector<Box3D> frame0 = {{12, 3, -1, 1.6, 3.9, 1.56, 0.4}, {30, -8, -0.9, 1.7, 4.1, 1.5, -2.0}};
  const std::vector<Box3D> frame1 = {{45, 10, -1.1, 1.6, 3.8, 1.6, 3.0}};
  int k = 0;
  for (const auto* frame : {&frame0, &frame1}) {
    const std::string stem = k == 0 ? "000000.txt" : "000001.txt";
    write_text(dir.path / "gt" / stem, testing::car_labels(*frame));
    std::vector<Detection> dets;
    for (const Box3D& b : *frame) dets.push_back({b, 0.9 - 0.1 * static_cast<double>(dets.size()), 0});
    write_text(dir.path / "det" / stem, testing::detection_lines(dets));
    ++k;
  }
  const auto r = run_cli("eval --gt-dir " + (dir / "gt") + " --det-dir " + (dir / "det") + " --kv " + (dir / "kv"));
  ASSERT_EQ(r.exit_code, 0);
  for (const char* line : {"3D               100.00     100.00     100.00\n",
                           "BEV              100.00     100.00     100.00\n",
                           "Orientation      100.00     100.00     100.00\n"})
    EXPECT_NE(r.out.find(line), std::string::npos) << r.out;
  EXPECT_NE(slurp(dir.path / "kv").find("moderate.num_gt = 3\n"), std::string::npos);
}

TEST(Cli, OutputsAreWellFormed) {
  ScratchDir dir("cli_outputs");
  const auto f = testing::make_cli_fixture(dir);
  const auto cases = testing::cli_cases(f, dir / "", 2);
  for (const auto& c : cases) {
    int code = -1;
    const std::string out = testing::run_case(c, 1, &code);
    EXPECT_EQ(code, 0) << c.name;
  }
  EXPECT_EQ(slurp(dir.path / "masks" / "box_type.pgm").substr(0, 10), "P5\n22 25\n2");
  const std::string trace = slurp(dir.path / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "step,total,L_S,L_loc_1,L_loc_2,L_loc_3,L_cls_1,L_cls_2,L_cls_3,"
                                               "L_dir_1,L_dir_2,L_dir_3");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 3);

  const auto bench = run_cli("--preset toy bench --no-timing");
  std::istringstream lines(bench.out);
  std::vector<std::string> stages;
  std::string line;
  while (std::getline(lines, line)) stages.push_back(line.substr(0, line.find(' ')));
  EXPECT_EQ(stages, (std::vector<std::string>{"stage", "voxelize", "VFE", "SCE", "head", "NMS", "total"}));

  const auto nms = run_cli("nms --input " + f.dets + " --output -");
  const auto all = read_lidar_detections(f.dets);
  const auto kept = std::count(nms.out.begin(), nms.out.end(), '\n');
  EXPECT_GT(kept, 0);
  EXPECT_LT(static_cast<std::size_t>(kept), all.size());

  const auto ppm = run_cli("--preset toy render-bev --input " + f.cloud + " --output -");
  EXPECT_EQ(ppm.out.substr(0, 14), "P6\n100 88\n255\n");
  EXPECT_EQ(ppm.out.size(), 14u + 100 * 88 * 3);
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
  ScratchDir dir("cli_determinism");
  const auto f = testing::make_cli_fixture(dir);
  for (const auto& c : testing::cli_cases(f, dir / "", 2)) {
    const std::string a = testing::run_case(c, 1);
    EXPECT_EQ(testing::run_case(c, 1), a) << c.name;
    EXPECT_EQ(testing::run_case(c, 8), a) << c.name;
  }
}

}  // namespace
}  // namespace voxdet
