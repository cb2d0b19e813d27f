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

#include "voxdet/box_geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxdet {

double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  double r = std::fmod(a + kPi, 2 * kPi);
  if (r <= 0) r += 2 * kPi;
  return r - kPi;
}

std::array<Point2, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = b.l / 2, hw = b.w / 2;
  constexpr int sx[4] = {1, -1, -1, 1};
  constexpr int sy[4] = {1, 1, -1, -1};
  std::array<Point2, 4> out{};
  for (int i = 0; i < 4; ++i) {
    const double u = sx[i] * hl, v = sy[i] * hw;
    out[i] = {b.x + c * u - s * v, b.y + s * u + c * v};
  }
  return out;
}

bool bev_contains(const Box3D& b, double px, double py) {
  const double dx = px - b.x, dy = py - b.y;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= b.l / 2 && std::abs(v) <= b.w / 2;
}

bool box_contains(const Box3D& b, double px, double py, double pz) {
  return std::abs(pz - b.z) <= b.h / 2 && bev_contains(b, px, py);
}

namespace {

double polygon_area(std::span<const Point2> p) {
  double a = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& u = p[i];
    const Point2& v = p[(i + 1) % p.size()];
    a += u.x * v.y - v.x * u.y;
  }
  return a / 2;
}

double cross(Point2 o, Point2 a, Point2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

double convex_intersection_area(std::span<const Point2> a, std::span<const Point2> b) {
  // Sutherland-Hodgman: clip `a` against every edge of `b`.
  std::vector<Point2> poly(a.begin(), a.end());
  std::vector<Point2> next;
  for (std::size_t e = 0; e < b.size() && !poly.empty(); ++e) {
    const Point2 p0 = b[e];
    const Point2 p1 = b[(e + 1) % b.size()];
    next.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point2 cur = poly[i];
      const Point2 prev = poly[(i + poly.size() - 1) % poly.size()];
      const double dc = cross(p0, p1, cur);
      const double dp = cross(p0, p1, prev);
      const bool cur_in = dc >= 0, prev_in = dp >= 0;
      if (cur_in != prev_in) {
        const double t = dp / (dp - dc);
        next.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      if (cur_in) next.push_back(cur);
    }
    poly.swap(next);
  }
  if (poly.size() < 3) return 0;
  return std::max(0.0, polygon_area(poly));
}

double bev_intersection(const Box3D& a, const Box3D& b) {
  // Circumscribed-circle rejection keeps the disjoint case cheap.
  const double ra = std::hypot(a.l, a.w) / 2, rb = std::hypot(b.l, b.w) / 2;
  if (std::hypot(a.x - b.x, a.y - b.y) > ra + rb) return 0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  return convex_intersection_area(ca, cb);
}

double bev_iou(const Box3D& a, const Box3D& b) {
  const double area_a = a.w * a.l, area_b = b.w * b.l;
  if (!(area_a > 0) || !(area_b > 0)) return 0;
  const double inter = bev_intersection(a, b);
  const double uni = area_a + area_b - inter;
  if (!(uni > 0)) return 0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double vol_a = a.w * a.l * a.h, vol_b = b.w * b.l * b.h;
  if (!(vol_a > 0) || !(vol_b > 0)) return 0;
  const double z_lo = std::max(a.z - a.h / 2, b.z - b.h / 2);
  const double z_hi = std::min(a.z + a.h / 2, b.z + b.h / 2);
  if (z_hi <= z_lo) return 0;
  const double inter = bev_intersection(a, b) * (z_hi - z_lo);
  const double uni = vol_a + vol_b - inter;
  if (!(uni > 0)) return 0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {
double iou_of(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::kBev ? bev_iou(a, b) : iou3d(a, b);
}
}  // namespace

std::vector<double> iou_matrix(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind) {
  std::vector<double> out(a.size() * b.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = iou_of(a[i], b[j], kind);
  }
  return out;
}

std::vector<double> iou_matrix_reference(std::span<const Box3D> a, std::span<const Box3D> b,
                                         IouKind kind) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (const Box3D& x : a)
    for (const Box3D& y : b) out.push_back(iou_of(x, y, kind));
  return out;
}

int direction_bin(double yaw) { return wrap_angle(yaw) >= 0 ? 1 : 0; }

Residual encode(const Box3D& gt, const Box3D& anchor) {
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  return {(gt.x - anchor.x) / diag,      (gt.y - anchor.y) / diag,
          (gt.z - anchor.z) / anchor.h,  std::log(gt.w / anchor.w),
          std::log(gt.l / anchor.l),     std::log(gt.h / anchor.h),
          gt.yaw - anchor.yaw};
}

Box3D decode(const Residual& r, const Box3D& anchor, int direction) {
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  Box3D b;
  b.x = r[0] * diag + anchor.x;
  b.y = r[1] * diag + anchor.y;
  b.z = r[2] * anchor.h + anchor.z;
  b.w = std::exp(r[3]) * anchor.w;
  b.l = std::exp(r[4]) * anchor.l;
  b.h = std::exp(r[5]) * anchor.h;
  const double yaw = r[6] + anchor.yaw;
  b.yaw = wrap_angle(direction_bin(yaw) == direction ? yaw : yaw + kPi);
  return b;
}

AnchorGrid::AnchorGrid(double x_min, double y_min, double cell_x, double cell_y, int nx, int ny,
                       AnchorConfig cfg)
    : nx_(nx), ny_(ny), cfg_(std::move(cfg)) {
  anchors_.reserve(static_cast<std::size_t>(nx) * ny * cfg_.rotations.size());
  for (double rot : cfg_.rotations) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        anchors_.push_back(Box3D{x_min + (ix + 0.5) * cell_x, y_min + (iy + 0.5) * cell_y, cfg_.z,
                                 cfg_.w, cfg_.l, cfg_.h, rot});
      }
    }
  }
}

std::vector<Detection> oriented_nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return dets[i].score > dets[j].score; });
  std::vector<Detection> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (bev_iou(k.box, dets[i].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

}  // namespace voxdet
