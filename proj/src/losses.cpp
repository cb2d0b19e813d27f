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

#include "voxdet/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace voxdet {

std::size_t TargetAssignment::num_positive() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kPositive));
}

Residual encode_target(const Box3D& gt, const Box3D& anchor) {
  Box3D g = gt;
  double d = wrap_angle(gt.yaw - anchor.yaw);
  if (d > kPi / 2) d -= kPi;
  if (d < -kPi / 2) d += kPi;
  g.yaw = anchor.yaw + d;
  return encode(g, anchor);
}

TargetAssignment assign_targets(const AnchorGrid& anchors, std::span<const Box3D> gts,
                                const AssignConfig& cfg) {
  const std::size_t n = anchors.size();
  TargetAssignment t;
  t.labels.assign(n, kNegative);
  t.matched.assign(n, -1);
  t.max_iou.assign(n, 0.0);
  t.residuals.assign(n, Residual{});
  t.direction.assign(n, 0);
  if (gts.empty()) return t;
  const std::size_t g = gts.size();
  const std::vector<double> iou = iou_matrix(anchors.boxes(), gts, cfg.iou);

  for (std::size_t a = 0; a < n; ++a) {
    double best = 0;
    int arg = -1;
    for (std::size_t j = 0; j < g; ++j) {
      if (iou[a * g + j] > best) {
        best = iou[a * g + j];
        arg = static_cast<int>(j);
      }
    }
    t.max_iou[a] = best;
    t.matched[a] = arg;
    if (best >= cfg.pos_iou) t.labels[a] = kPositive;
    else if (best >= cfg.neg_iou) t.labels[a] = kIgnored;
  }
  for (std::size_t j = 0; j < g; ++j) {
    double best = 0;
    std::size_t arg = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (iou[a * g + j] > best) {
        best = iou[a * g + j];
        arg = a;
      }
    }
    if (arg == n) continue;
    t.labels[arg] = kPositive;
    t.matched[arg] = static_cast<int>(j);
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (t.labels[a] != kPositive) {
      if (t.labels[a] == kNegative) t.matched[a] = -1;
      continue;
    }
    const Box3D& gt = gts[t.matched[a]];
    t.residuals[a] = encode_target(gt, anchors[a]);
    t.direction[a] = direction_bin(gt.yaw);
  }
  return t;
}

PartTargets slice_targets(const TargetAssignment& t, const AnchorGrid& anchors, const PartSpec& part) {
  PartTargets p;
  p.anchors = anchors.per_cell();
  p.height = anchors.ny();
  p.width = part.width();
  p.labels.resize(static_cast<std::size_t>(p.anchors) * p.height * p.width);
  for (int a = 0; a < p.anchors; ++a)
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const std::size_t g = anchors.ordinal(a, y, part.lo + x);
        const int local = (a * p.height + y) * p.width + x;
        p.labels[local] = t.labels[g];
        if (t.labels[g] == kPositive) {
          p.positives.push_back(local);
          p.residuals.push_back(t.residuals[g]);
          p.direction.push_back(t.direction[g]);
        }
      }
  return p;
}

namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void require_scalar_normalizer(double n) {
  if (!(n > 0)) throw UsageError("loss normalizer must be positive");
}

// Splits a local anchor index of a (1, A, H, w) map into (anchor, spatial).
struct AnchorSite {
  std::int64_t a, hw;
};

AnchorSite anchor_site(int local, std::int64_t plane) { return {local / plane, local % plane}; }

}  // namespace

nn::Tensor focal_loss(const nn::Tensor& logits, std::span<const std::int8_t> labels, double alpha,
                      double gamma, double normalizer) {
  require_scalar_normalizer(normalizer);
  if (static_cast<std::size_t>(logits.numel()) != labels.size())
    throw UsageError("focal_loss: label count does not match logits");
  auto x = logits.data();
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnored) continue;
    const double p = 1.0 / (1.0 + std::exp(-x[i]));
    if (labels[i] == kPositive) total += alpha * std::pow(1 - p, gamma) * softplus(-x[i]);
    else total += (1 - alpha) * std::pow(p, gamma) * softplus(x[i]);
  }
  std::vector<std::int8_t> lab(labels.begin(), labels.end());
  return nn::make_op({1}, {total / normalizer}, {logits},
                     [logits, lab = std::move(lab), alpha, gamma, normalizer](std::span<const double> g) {
                       auto x = logits.data();
                       auto gx = logits.grad_mut();
                       const double s = g[0] / normalizer;
                       for (std::size_t i = 0; i < lab.size(); ++i) {
                         if (lab[i] == kIgnored) continue;
                         const double p = 1.0 / (1.0 + std::exp(-x[i]));
                         if (lab[i] == kPositive) {
                           const double lnp = -softplus(-x[i]);
                           gx[i] += s * alpha * std::pow(1 - p, gamma) * (gamma * p * lnp - (1 - p));
                         } else {
                           const double ln1p = -softplus(x[i]);
                           gx[i] += s * (1 - alpha) * std::pow(p, gamma) * (p - gamma * (1 - p) * ln1p);
                         }
                       }
                     });
}

nn::Tensor loc_loss(const nn::Tensor& box, std::span<const int> positives,
                    std::span<const Residual> targets, double normalizer) {
  require_scalar_normalizer(normalizer);
  if (box.rank() != 4 || box.dim(1) % 7 != 0) throw UsageError("loc_loss: expected a (1, 7A, H, w) map");
  if (positives.size() != targets.size()) throw UsageError("loc_loss: one target per positive required");
  const std::int64_t plane = box.dim(2) * box.dim(3);
  auto v = box.data();
  std::vector<std::int64_t> idx;
  std::vector<double> diff;
  double total = 0;
  for (std::size_t k = 0; k < positives.size(); ++k) {
    const AnchorSite s = anchor_site(positives[k], plane);
    for (int j = 0; j < 7; ++j) {
      const std::int64_t i = (s.a * 7 + j) * plane + s.hw;
      const double u = v[i] - targets[k][j];
      total += std::abs(u) < 1 ? 0.5 * u * u : std::abs(u) - 0.5;
      idx.push_back(i);
      diff.push_back(u);
    }
  }
  return nn::make_op({1}, {total / normalizer}, {box},
                     [box, idx = std::move(idx), diff = std::move(diff), normalizer](std::span<const double> g) {
                       auto gb = box.grad_mut();
                       for (std::size_t k = 0; k < idx.size(); ++k) {
                         const double u = diff[k];
                         const double d = std::abs(u) < 1 ? u : (u > 0 ? 1.0 : -1.0);
                         gb[idx[k]] += g[0] * d / normalizer;
                       }
                     });
}

nn::Tensor dir_loss(const nn::Tensor& dir, std::span<const int> positives, std::span<const int> bits,
                    double normalizer) {
  require_scalar_normalizer(normalizer);
  if (dir.rank() != 4 || dir.dim(1) % 2 != 0) throw UsageError("dir_loss: expected a (1, 2A, H, w) map");
  if (positives.size() != bits.size()) throw UsageError("dir_loss: one bit per positive required");
  const std::int64_t plane = dir.dim(2) * dir.dim(3);
  auto v = dir.data();
  std::vector<std::int64_t> i0, i1;
  std::vector<double> p1;
  double total = 0;
  for (std::size_t k = 0; k < positives.size(); ++k) {
    const AnchorSite s = anchor_site(positives[k], plane);
    const std::int64_t a = (s.a * 2) * plane + s.hw, b = (s.a * 2 + 1) * plane + s.hw;
    const double d = v[b] - v[a];
    // CE = softplus(-d) for bin 1, softplus(d) for bin 0.
    total += bits[k] ? softplus(-d) : softplus(d);
    i0.push_back(a);
    i1.push_back(b);
    p1.push_back(1.0 / (1.0 + std::exp(-d)) - (bits[k] ? 1.0 : 0.0));
  }
  return nn::make_op({1}, {total / normalizer}, {dir},
                     [dir, i0 = std::move(i0), i1 = std::move(i1), p1 = std::move(p1),
                      normalizer](std::span<const double> g) {
                       auto gd = dir.grad_mut();
                       for (std::size_t k = 0; k < i0.size(); ++k) {
                         const double e = g[0] * p1[k] / normalizer;
                         gd[i1[k]] += e;
                         gd[i0[k]] -= e;
                       }
                     });
}

LossReport total_loss(std::span<const PartLoss> parts, double seg, const LossWeights& w) {
  LossReport r;
  r.seg = seg;
  r.parts.assign(parts.begin(), parts.end());
  double head = 0;
  for (const PartLoss& p : parts) head += w.loc * p.loc + p.cls + w.dir * p.dir;
  r.total = w.seg * seg + head;
  return r;
}

namespace {
void append(std::string& s, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.push_back(',');
  s.append(buf, res.ptr);
}
}  // namespace

std::string loss_csv_header(std::size_t parts) {
  std::string s = "step,total,L_S";
  for (const char* term : {"L_loc_", "L_cls_", "L_dir_"})
    for (std::size_t p = 1; p <= parts; ++p) s += "," + std::string(term) + std::to_string(p);
  return s;
}

std::string loss_csv_row(std::size_t step, const LossReport& r) {
  std::string s = std::to_string(step);
  append(s, r.total);
  append(s, r.seg);
  for (const PartLoss& p : r.parts) append(s, p.loc);
  for (const PartLoss& p : r.parts) append(s, p.cls);
  for (const PartLoss& p : r.parts) append(s, p.dir);
  return s;
}

}  // namespace voxdet
