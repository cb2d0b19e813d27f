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

// voxdet command-line front end.

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "voxdet/config.hpp"
#include "voxdet/eval_metrics.hpp"
#include "voxdet/kitti_io.hpp"
#include "voxdet/network.hpp"
#include "voxdet/train.hpp"

namespace fs = std::filesystem;
using namespace voxdet;

namespace {

struct Globals {
  std::string config_file;
  std::string preset = "default";
  std::vector<std::string> sets;
  int threads = 0;
};

RunConfig load_config(const Globals& g) {
  RunConfig c = RunConfig::preset(g.preset);
  if (!g.config_file.empty()) c.merge_file(g.config_file);
  for (const std::string& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    c.set(s.substr(0, eq), s.substr(eq + 1));
  }
  c.validate();
  return c;
}

// Writes to `path`, or to stdout for "-".
void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::vector<Box3D> load_boxes(const std::string& labels, const std::string& boxes, const std::string& calib) {
  std::vector<Box3D> out;
  if (!labels.empty()) {
    const CalibMatrices cal = calib.empty() ? canonical_calib() : read_calib(calib);
    for (const LabelRecord& l : read_labels(labels))
      if (l.type == "Car") out.push_back(camera_box_to_lidar(l, cal));
  }
  if (!boxes.empty())
    for (const Detection& d : read_lidar_detections(boxes)) out.push_back(d.box);
  return out;
}

std::string detections_text(std::span<const Detection> dets) {
  std::string s;
  for (const Detection& d : dets) s += format_detection(d) + "\n";
  return s;
}

Detector make_model(const RunConfig& cfg, const std::string& checkpoint) {
  Detector model(cfg.model);
  if (!checkpoint.empty()) model.params().load(fs::path(checkpoint));
  return model;
}

// ---------------------------------------------------------------------------

void cmd_voxelize(const RunConfig& cfg, const std::string& input, const std::string& output) {
  const SparseVoxelGrid grid = voxelize(read_point_cloud(input), cfg.model.voxel);
  std::ostringstream out;
  write_grid_dump(out, grid);
  emit(output, out.str());
}

void cmd_masks(const RunConfig& cfg, const std::string& input, const std::vector<Box3D>& boxes,
               const std::string& out_dir) {
  const SparseVoxelGrid grid = voxelize(read_point_cloud(input), cfg.model.voxel);
  fs::create_directories(out_dir);
  for (MaskKind kind : {MaskKind::kVoxelType, MaskKind::kBoxType}) {
    const SemanticMask m = make_mask(grid, cfg.model.voxel, boxes, kind, cfg.model.bev_stride);
    std::ostringstream out;
    write_pgm(out, m);
    emit((fs::path(out_dir) / (to_string(kind) + ".pgm")).string(), out.str());
  }
}

std::vector<Detection> run_forward(const Detector& model, const PointCloud& cloud) {
  nn::NoGradGuard guard;
  const ForwardResult r = model.forward(model.voxelize(cloud), false);
  const FusedPrediction fused = fuse_scores(r.parts, model.config().parts, model.bev_geometry().nx);
  return decode_candidates(fused, model.anchors(), model.config().score_threshold);
}

void cmd_forward(const RunConfig& cfg, const std::string& input, const std::string& checkpoint,
                 const std::string& output, const std::string& kitti, const std::string& calib) {
  const Detector model = make_model(cfg, checkpoint);
  const std::vector<Detection> dets = run_forward(model, read_point_cloud(input));
  emit(output, detections_text(dets));
  if (!kitti.empty()) write_detections(kitti, dets, calib.empty() ? canonical_calib() : read_calib(calib));
}

void cmd_nms(const RunConfig& cfg, const std::string& input, const std::string& output) {
  const std::vector<Detection> dets = read_lidar_detections(input);
  emit(output, detections_text(oriented_nms(dets, cfg.model.nms_iou)));
}

void cmd_train(const RunConfig& cfg, const std::string& checkpoint, const std::string& trace, bool quiet) {
  const std::vector<Scene> scenes = make_synthetic_dataset(cfg.model.voxel, cfg.data);
  Detector model(cfg.model);
  std::string csv = loss_csv_header(cfg.model.parts.size()) + "\n";
  const TrainResult r = train_toy(model, scenes, cfg.train, [&](std::size_t step, const LossReport& rep) {
    csv += loss_csv_row(step, rep) + "\n";
    if (!quiet && (step % 10 == 0)) std::cerr << "step " << step << " loss " << rep.total << "\n";
  });
  if (!checkpoint.empty()) model.params().save(fs::path(checkpoint));
  if (!trace.empty()) emit(trace, csv);
  char buf[160];
  std::snprintf(buf, sizeof buf, "steps %zu\nloss_first %.6f\nloss_last %.6f\nloss_drop %.6f\nseg_iou %.6f\n",
                r.trace.size(), r.trace.empty() ? 0.0 : r.trace.front().total,
                r.trace.empty() ? 0.0 : r.trace.back().total, r.loss_drop, r.seg_iou);
  std::cout << buf;
}

void cmd_eval(const RunConfig& cfg, const std::string& gt_dir, const std::string& det_dir,
              const std::string& calib_dir, const std::string& kv) {
  if (!fs::is_directory(gt_dir)) throw DataError("gt directory " + gt_dir + " does not exist");
  std::vector<fs::path> labels;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.path().extension() == ".txt") labels.push_back(e.path());
  std::sort(labels.begin(), labels.end());
  std::vector<EvalFrame> frames;
  for (const fs::path& lp : labels) {
    const std::string stem = lp.stem().string();
    CalibMatrices calib = canonical_calib();
    if (!calib_dir.empty()) calib = read_calib(fs::path(calib_dir) / (stem + ".txt"));
    EvalFrame f;
    const std::vector<LabelRecord> recs = read_labels(lp);
    f.gts = eval_gts_from_labels(recs, calib);
    const fs::path dp = fs::path(det_dir) / (stem + ".txt");
    if (fs::exists(dp)) f.dets = read_lidar_detections(dp);
    frames.push_back(std::move(f));
  }
  const EvalResult r = evaluate(frames, cfg.eval);
  std::cout << format_table(r);
  if (!kv.empty()) emit(kv, format_kv(r));
}

// Binary PPM; x grows upward, y grows to the left.
void cmd_render(const RunConfig& cfg, const std::string& input, const std::vector<Box3D>& gts,
                const std::string& dets_path, const std::string& output, double resolution) {
  if (!(resolution > 0)) throw UsageError("--resolution must be positive");
  const auto& v = cfg.model.voxel;
  const int w = static_cast<int>(std::lround((v.range_max[1] - v.range_min[1]) / resolution));
  const int h = static_cast<int>(std::lround((v.range_max[0] - v.range_min[0]) / resolution));
  std::vector<unsigned char> img(static_cast<std::size_t>(w) * h * 3, 0);
  auto pixel = [&](double x, double y, int& r, int& c) {
    r = static_cast<int>(std::floor((v.range_max[0] - x) / resolution));
    c = static_cast<int>(std::floor((v.range_max[1] - y) / resolution));
    return r >= 0 && r < h && c >= 0 && c < w;
  };
  auto put = [&](int r, int c, unsigned char R, unsigned char G, unsigned char B) {
    if (r < 0 || r >= h || c < 0 || c >= w) return;
    unsigned char* p = &img[(static_cast<std::size_t>(r) * w + c) * 3];
    p[0] = R;
    p[1] = G;
    p[2] = B;
  };
  if (!input.empty())
    for (const LidarPoint& p : read_point_cloud(input).points) {
      int r, c;
      if (pixel(p.x, p.y, r, c)) put(r, c, 128, 128, 128);
    }
  auto draw = [&](const Box3D& b, unsigned char R, unsigned char G, unsigned char B) {
    const auto k = bev_corners(b);
    for (int e = 0; e < 4; ++e) {
      const Point2 a = k[e], z = k[(e + 1) % 4];
      const double len = std::hypot(z.x - a.x, z.y - a.y);
      const int steps = std::max(1, static_cast<int>(std::ceil(len / (resolution * 0.5))));
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        int r, c;
        pixel(a.x + t * (z.x - a.x), a.y + t * (z.y - a.y), r, c);
        put(r, c, R, G, B);
      }
    }
  };
  for (const Box3D& b : gts) draw(b, 0, 255, 0);
  if (!dets_path.empty())
    for (const Detection& d : read_lidar_detections(dets_path)) draw(d.box, 255, 0, 0);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data()), img.size());
  emit(output, out);
}

double checksum(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

void cmd_bench(const RunConfig& cfg, const std::string& input, const std::string& checkpoint, int repeat,
               bool timing) {
  if (repeat < 1) throw UsageError("--repeat must be >= 1");
  PointCloud cloud;
  if (!input.empty()) {
    cloud = read_point_cloud(input);
  } else {
    SyntheticConfig sc = cfg.data;
    cloud = make_synthetic_scene(cfg.model.voxel, sc, 0).cloud;
  }
  const Detector model = make_model(cfg, checkpoint);
  nn::NoGradGuard guard;
  struct Row {
    const char* stage;
    std::size_t items = 0;
    double sum = 0;
    double ms = 0;
  };
  std::vector<Row> rows = {{"voxelize"}, {"VFE"}, {"SCE"}, {"head"}, {"NMS"}};
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t) {
    return std::chrono::duration<double, std::milli>(clock::now() - t).count();
  };
  for (int it = 0; it < repeat; ++it) {
    auto t = clock::now();
    const SparseVoxelGrid grid = model.voxelize(cloud);
    rows[0].ms += ms_since(t);
    rows[0].items = grid.size();
    rows[0].sum = checksum(grid.features);

    t = clock::now();
    const nn::FeatureMap bev = model.encode(grid, false);
    rows[1].ms += ms_since(t);
    rows[1].items = static_cast<std::size_t>(bev.numel());
    rows[1].sum = checksum(bev.data());

    t = clock::now();
    const SceOutput sce = model.context(bev, false);
    rows[2].ms += ms_since(t);
    rows[2].items = static_cast<std::size_t>(sce.fused.numel());
    rows[2].sum = checksum(sce.fused.data());

    t = clock::now();
    const std::vector<PartMaps> parts = model.head(sce.fused, false);
    const FusedPrediction fused = fuse_scores(parts, model.config().parts, model.bev_geometry().nx);
    const std::vector<Detection> cand = decode_candidates(fused, model.anchors(), model.config().score_threshold);
    rows[3].ms += ms_since(t);
    rows[3].items = fused.size();
    rows[3].sum = checksum(fused.score);

    t = clock::now();
    const std::vector<Detection> kept = oriented_nms(cand, model.config().nms_iou);
    rows[4].ms += ms_since(t);
    rows[4].items = kept.size();
    double s = 0;
    for (const Detection& d : kept) s += d.score + d.box.x + d.box.y;
    rows[4].sum = s;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12s %24s %12s\n", "stage", "items", "checksum", "ms");
  std::string out = buf;
  double total = 0;
  for (const Row& r : rows) {
    const double ms = r.ms / repeat;
    total += ms;
    if (timing) std::snprintf(buf, sizeof buf, "%-10s %12zu %24.15e %12.3f\n", r.stage, r.items, r.sum, ms);
    else std::snprintf(buf, sizeof buf, "%-10s %12zu %24.15e %12s\n", r.stage, r.items, r.sum, "-");
    out += buf;
  }
  if (timing) std::snprintf(buf, sizeof buf, "%-10s %12s %24s %12.3f\n", "total", "", "", total);
  else std::snprintf(buf, sizeof buf, "%-10s %12s %24s %12s\n", "total", "", "", "-");
  out += buf;
  std::cout << out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxdet: sparse voxel 3D vehicle detector"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file applied over the preset");
  app.add_option("--preset", g.preset, "default or toy")->capture_default_str();
  app.add_option("--set", g.sets, "override one key, key=value (repeatable)");
  app.add_option("--threads", g.threads, "worker thread cap (0 keeps the runtime default)")
      ->check(CLI::NonNegativeNumber);

  std::string input, output = "-", checkpoint, labels, boxes, calib, kitti, trace, gt_dir, det_dir, calib_dir, kv,
                     dets, out_dir;
  int repeat = 1;
  bool no_timing = false, quiet = false;
  double resolution = 0.1;

  auto* config = app.add_subcommand("config", "print the effective configuration");

  auto* vox = app.add_subcommand("voxelize", "point cloud -> grid dump");
  vox->add_option("--input", input, "KITTI .bin point cloud")->required();
  vox->add_option("--output", output, "grid dump path, - for stdout");

  auto* masks = app.add_subcommand("masks", "point cloud + boxes -> voxel_type.pgm and box_type.pgm");
  masks->add_option("--input", input, "KITTI .bin point cloud")->required();
  masks->add_option("--labels", labels, "KITTI label file (Car records)");
  masks->add_option("--boxes", boxes, "LiDAR box file 'x y z w l h theta score'");
  masks->add_option("--calib", calib, "KITTI calibration for --labels");
  masks->add_option("--output-dir", out_dir, "directory for the graymaps")->required();

  auto* fwd = app.add_subcommand("forward", "point cloud -> scored detections before NMS");
  fwd->add_option("--input", input, "KITTI .bin point cloud")->required();
  fwd->add_option("--checkpoint", checkpoint, "parameter checkpoint (seeded init when absent)");
  fwd->add_option("--output", output, "LiDAR detection file, - for stdout");
  fwd->add_option("--kitti", kitti, "also write KITTI result format here");
  fwd->add_option("--calib", calib, "calibration for --kitti");

  auto* train = app.add_subcommand("train-toy", "train on the synthetic toy dataset");
  train->add_option("--checkpoint", checkpoint, "write parameters here");
  train->add_option("--trace", trace, "write the loss trace CSV here");
  train->add_flag("--quiet", quiet, "no progress on stderr");

  auto* nms = app.add_subcommand("nms", "oriented NMS over a detection file");
  nms->add_option("--input", input, "LiDAR detection file")->required();
  nms->add_option("--output", output, "filtered detections, - for stdout");

  auto* eval = app.add_subcommand("eval", "KITTI-protocol AP / AOS");
  eval->add_option("--gt-dir", gt_dir, "KITTI label files")->required();
  eval->add_option("--det-dir", det_dir, "LiDAR detection files with matching names")->required();
  eval->add_option("--calib-dir", calib_dir, "per-frame calibration files");
  eval->add_option("--kv", kv, "write the key-value dump here");

  auto* render = app.add_subcommand("render-bev", "BEV image with gt (green) and detections (red)");
  render->add_option("--input", input, "KITTI .bin point cloud");
  render->add_option("--labels", labels, "KITTI label file");
  render->add_option("--boxes", boxes, "LiDAR gt box file");
  render->add_option("--calib", calib, "calibration for --labels");
  render->add_option("--dets", dets, "LiDAR detection file");
  render->add_option("--resolution", resolution, "metres per pixel")->capture_default_str();
  render->add_option("--output", output, "PPM path, - for stdout")->required();

  auto* bench = app.add_subcommand("bench", "per-stage timing table");
  bench->add_option("--input", input, "KITTI .bin point cloud (synthetic scene when absent)");
  bench->add_option("--checkpoint", checkpoint, "parameter checkpoint");
  bench->add_option("--repeat", repeat, "runs to average")->capture_default_str();
  bench->add_flag("--no-timing", no_timing, "print '-' in the ms column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);
    const RunConfig cfg = load_config(g);
    if (*config) std::cout << cfg.dump();
    else if (*vox) cmd_voxelize(cfg, input, output);
    else if (*masks) cmd_masks(cfg, input, load_boxes(labels, boxes, calib), out_dir);
    else if (*fwd) cmd_forward(cfg, input, checkpoint, output, kitti, calib);
    else if (*train) cmd_train(cfg, checkpoint, trace, quiet);
    else if (*nms) cmd_nms(cfg, input, output);
    else if (*eval) cmd_eval(cfg, gt_dir, det_dir, calib_dir, kv);
    else if (*render) cmd_render(cfg, input, load_boxes(labels, boxes, calib), dets, output, resolution);
    else if (*bench) cmd_bench(cfg, input, checkpoint, repeat, !no_timing);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "voxdet: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "voxdet: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "voxdet: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "voxdet: " << e.what() << "\n";
    return 2;
  }
}
