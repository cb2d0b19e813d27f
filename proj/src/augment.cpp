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

#include "voxdet/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace voxdet {

namespace {

bool plane_through(const LidarPoint& p, const LidarPoint& q, const LidarPoint& r, GroundPlane& out) {
  const Eigen::Vector3d a(p.x, p.y, p.z), b(q.x, q.y, q.z), c(r.x, r.y, r.z);
  Eigen::Vector3d n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-9) return false;
  n /= len;
  if (n.z() < 0) n = -n;
  out = {n.x(), n.y(), n.z(), -n.dot(a)};
  return true;
}

}  // namespace

std::size_t count_inliers(const PointCloud& cloud, const GroundPlane& plane, double tol) {
  std::size_t n = 0;
  for (const LidarPoint& p : cloud.points) n += std::abs(plane.distance(p.x, p.y, p.z)) <= tol;
  return n;
}

GroundPlane fit_ground_plane(const PointCloud& cloud, const RansacConfig& cfg) {
  const auto& pts = cloud.points;
  if (pts.size() < 3) throw DataError("ground plane fit needs at least 3 points");
  if (cfg.iterations < 1 || !(cfg.inlier_tol > 0)) throw UsageError("RANSAC needs iterations >= 1 and tol > 0");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  GroundPlane best;
  std::size_t best_count = 0;
  bool found = false;
  auto consider = [&](const GroundPlane& cand) {
    const std::size_t c = count_inliers(cloud, cand, cfg.inlier_tol);
    if (!found || c > best_count) {
      best = cand;
      best_count = c;
      found = true;
    }
  };
  if (pts.size() == 3) {
    GroundPlane p;
    if (plane_through(pts[0], pts[1], pts[2], p)) consider(p);
  } else {
    for (int it = 0; it < cfg.iterations; ++it) {
      const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
      if (i == j || j == k || i == k) continue;
      GroundPlane p;
      if (plane_through(pts[i], pts[j], pts[k], p)) consider(p);
    }
  }
  if (!found) throw DataError("ground plane fit needs 3 non-collinear points");

  // Total least squares on the inliers: normal = smallest principal axis.
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (const LidarPoint& p : pts)
    if (std::abs(best.distance(p.x, p.y, p.z)) <= cfg.inlier_tol) {
      mean += Eigen::Vector3d(p.x, p.y, p.z);
      ++n;
    }
  if (n < 3) return best;
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const LidarPoint& p : pts)
    if (std::abs(best.distance(p.x, p.y, p.z)) <= cfg.inlier_tol) {
      const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
      cov += d * d.transpose();
    }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d normal = eig.eigenvectors().col(0);
  if (normal.z() < 0) normal = -normal;
  if (eig.eigenvalues()(1) < 1e-12) return best;  // inliers collinear
  return {normal.x(), normal.y(), normal.z(), -normal.dot(mean)};
}

std::vector<GtSample> build_gt_database(std::span<const Scene> scenes) {
  std::vector<GtSample> db;
  for (const Scene& s : scenes)
    for (const Box3D& b : s.boxes) {
      GtSample g{b, {}};
      for (const LidarPoint& p : s.cloud.points)
        if (box_contains(b, p.x, p.y, p.z)) g.points.points.push_back(p);
      db.push_back(std::move(g));
    }
  return db;
}

void write_gt_database(const std::filesystem::path& dir, std::span<const GtSample> samples) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sample_%06zu", i);
    write_point_cloud(dir / (std::string(stem) + ".bin"), samples[i].points);
    std::ofstream label(dir / (std::string(stem) + ".txt"));
    if (!label) throw DataError("cannot write " + (dir / stem).string() + ".txt");
    const Box3D& b = samples[i].box;
    char line[256];
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", b.x, b.y, b.z, b.w,
                  b.l, b.h, b.yaw);
    label << line;
  }
}

std::vector<GtSample> read_gt_database(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("gt database " + dir.string() + " is not a directory");
  std::vector<std::filesystem::path> labels;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".txt") labels.push_back(e.path());
  std::sort(labels.begin(), labels.end());
  std::vector<GtSample> db;
  for (const auto& lp : labels) {
    std::ifstream in(lp);
    GtSample g;
    if (!(in >> g.box.x >> g.box.y >> g.box.z >> g.box.w >> g.box.l >> g.box.h >> g.box.yaw))
      throw DataError(lp.string() + ": expected \"x y z w l h yaw\"");
    std::filesystem::path bin = lp;
    bin.replace_extension(".bin");
    g.points = read_point_cloud(bin);
    db.push_back(std::move(g));
  }
  return db;
}

namespace {

void rotate_point(LidarPoint& p, double cx, double cy, double c, double s) {
  const double dx = p.x - cx, dy = p.y - cy;
  p.x = static_cast<float>(cx + c * dx - s * dy);
  p.y = static_cast<float>(cy + s * dx + c * dy);
}

bool collides(const Box3D& b, std::span<const Box3D> boxes) {
  for (const Box3D& o : boxes)
    if (bev_intersection(b, o) > 0) return true;
  return false;
}

}  // namespace

void rotate_scene(Scene& scene, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  for (LidarPoint& p : scene.cloud.points) rotate_point(p, 0, 0, c, s);
  for (Box3D& b : scene.boxes) {
    const double x = b.x, y = b.y;
    b.x = c * x - s * y;
    b.y = s * x + c * y;
    b.yaw = wrap_angle(b.yaw + angle);
  }
}

Scene augment_scene(const Scene& scene, std::span<const GtSample> database, const GroundPlane& plane,
                    const AugmentConfig& cfg, std::mt19937_64& rng) {
  Scene out = scene;
  if (!cfg.enabled) return out;

  if (cfg.gt_sampling && !database.empty() && cfg.sample_count > 0) {
    if (!(plane.c > 0)) throw DataError("gt sampling needs a non-vertical ground plane");
    std::vector<std::size_t> order(database.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t tries = std::min<std::size_t>(order.size(), cfg.sample_count);
    for (std::size_t t = 0; t < tries; ++t) {
      const GtSample& sample = database[order[t]];
      Box3D b = sample.box;
      b.z = plane.height_at(b.x, b.y) + b.h / 2;
      if (collides(b, out.boxes)) continue;
      const double dz = b.z - sample.box.z;
      std::erase_if(out.cloud.points, [&](const LidarPoint& p) { return bev_contains(b, p.x, p.y); });
      for (LidarPoint p : sample.points.points) {
        p.z = static_cast<float>(p.z + dz);
        out.cloud.points.push_back(p);
      }
      out.boxes.push_back(b);
    }
  }

  std::normal_distribution<double> shift(0.0, std::sqrt(cfg.translate_var));
  std::uniform_real_distribution<double> yaw_noise(-cfg.box_yaw_range, cfg.box_yaw_range);
  for (Box3D& b : out.boxes) {
    const double tx = cfg.translate_var > 0 ? shift(rng) : 0.0;
    const double ty = cfg.translate_var > 0 ? shift(rng) : 0.0;
    const double tz = cfg.translate_var > 0 ? shift(rng) : 0.0;
    const double dyaw = cfg.box_rotation && cfg.box_yaw_range > 0 ? yaw_noise(rng) : 0.0;
    const double c = std::cos(dyaw), s = std::sin(dyaw);
    for (LidarPoint& p : out.cloud.points) {
      if (!box_contains(b, p.x, p.y, p.z)) continue;
      rotate_point(p, b.x, b.y, c, s);
      p.x = static_cast<float>(p.x + tx);
      p.y = static_cast<float>(p.y + ty);
      p.z = static_cast<float>(p.z + tz);
    }
    b.x += tx;
    b.y += ty;
    b.z += tz;
    b.yaw = wrap_angle(b.yaw + dyaw);
  }

  if (cfg.global_rotation && cfg.global_rot_range > 0) {
    std::uniform_real_distribution<double> rot(-cfg.global_rot_range, cfg.global_rot_range);
    rotate_scene(out, rot(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------

Scene make_synthetic_scene(const VoxelizerConfig& vox, const SyntheticConfig& cfg, std::size_t index) {
  std::mt19937_64 rng(splitmix64(cfg.seed) ^ splitmix64(index + 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double x0 = vox.range_min[0], x1 = vox.range_max[0];
  const double y0 = vox.range_min[1], y1 = vox.range_max[1];

  Scene scene;
  const int cars = cfg.min_cars + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.max_cars - cfg.min_cars + 1));
  for (int attempt = 0; attempt < 200 && static_cast<int>(scene.boxes.size()) < cars; ++attempt) {
    Box3D b;
    b.w = uniform(1.5, 1.7);
    b.l = uniform(3.7, 4.1);
    b.h = uniform(1.45, 1.65);
    b.yaw = wrap_angle(uniform(-kPi, kPi));
    const double r = 0.5 * std::hypot(b.w, b.l);
    if (x1 - x0 <= 2 * r || y1 - y0 <= 2 * r) break;
    b.x = uniform(x0 + r, x1 - r);
    b.y = uniform(y0 + r, y1 - r);
    b.z = cfg.ground_z + b.h / 2;
    Box3D grown = b;
    grown.w += 0.6;
    grown.l += 0.6;
    if (collides(grown, scene.boxes)) continue;
    scene.boxes.push_back(b);
  }

  std::normal_distribution<double> jitter(0.0, 0.02);
  const auto ground_points = static_cast<std::size_t>(cfg.ground_density * (x1 - x0) * (y1 - y0));
  for (std::size_t i = 0; i < ground_points; ++i) {
    LidarPoint p;
    p.x = static_cast<float>(uniform(x0, x1));
    p.y = static_cast<float>(uniform(y0, y1));
    p.z = static_cast<float>(cfg.ground_z + jitter(rng));
    p.intensity = static_cast<float>(uniform(0.0, 0.3));
    bool hidden = false;
    for (const Box3D& b : scene.boxes) hidden = hidden || bev_contains(b, p.x, p.y);
    if (!hidden) scene.cloud.points.push_back(p);
  }

  for (const Box3D& b : scene.boxes) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double bottom = b.z - b.h / 2 + 0.25;
    const double top = b.z + b.h / 2;
    for (int i = 0; i < cfg.car_points; ++i) {
      // Local frame: u along the heading, v across it. Faces in proportion to
      // area: top, two long sides, two short ends.
      double u, v, z;
      const double pick = unit(rng);
      const double shrink = 0.98;
      if (pick < 0.35) {
        u = uniform(-0.5, 0.5) * b.l * shrink;
        v = uniform(-0.5, 0.5) * b.w * shrink;
        z = top - 0.01;
      } else if (pick < 0.85) {
        u = uniform(-0.5, 0.5) * b.l * shrink;
        v = (unit(rng) < 0.5 ? -0.5 : 0.5) * b.w * shrink;
        z = uniform(bottom, top);
      } else {
        u = (unit(rng) < 0.5 ? -0.5 : 0.5) * b.l * shrink;
        v = uniform(-0.5, 0.5) * b.w * shrink;
        z = uniform(bottom, top);
      }
      LidarPoint p;
      p.x = static_cast<float>(b.x + c * u - s * v);
      p.y = static_cast<float>(b.y + s * u + c * v);
      p.z = static_cast<float>(std::min(z, top - 0.01));
      p.intensity = static_cast<float>(uniform(0.3, 1.0));
      scene.cloud.points.push_back(p);
    }
  }
  return scene;
}

std::vector<Scene> make_synthetic_dataset(const VoxelizerConfig& vox, const SyntheticConfig& cfg) {
  if (cfg.num_scenes < 0 || cfg.min_cars < 0 || cfg.max_cars < cfg.min_cars)
    throw UsageError("synthetic dataset: invalid scene or car counts");
  std::vector<Scene> scenes;
  scenes.reserve(cfg.num_scenes);
  for (int i = 0; i < cfg.num_scenes; ++i) scenes.push_back(make_synthetic_scene(vox, cfg, i));
  return scenes;
}

}  // namespace voxdet
