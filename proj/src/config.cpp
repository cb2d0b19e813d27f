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

#include "voxdet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

namespace voxdet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& s) {
  double v = 0;
  const std::string t = trim(s);
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw UsageError("expected a finite number, got '" + s + "'");
  return v;
}

long long to_int(const std::string& s) {
  long long v = 0;
  const std::string t = trim(s);
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw UsageError("expected an integer, got '" + s + "'");
  return v;
}

int to_int32(const std::string& s) {
  const long long v = to_int(s);
  if (v < -2147483647LL || v > 2147483647LL) throw UsageError("integer out of range: '" + s + "'");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const std::string t = trim(s);
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw UsageError("expected a nonnegative integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true") return true;
  if (t == "false") return false;
  throw UsageError("expected true or false, got '" + s + "'");
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const std::string& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

std::array<double, 3> to_triple(const std::string& s) {
  const std::vector<double> v = to_doubles(s);
  if (v.size() != 3) throw UsageError("expected 3 comma-separated numbers, got '" + s + "'");
  return {v[0], v[1], v[2]};
}

std::string fmt_triple(const std::array<double, 3>& v) { return fmt_list({v[0], v[1], v[2]}); }

std::vector<std::vector<std::string>> records(const std::string& s, std::size_t fields) {
  std::vector<std::vector<std::string>> out;
  for (const std::string& rec : split(s, ';')) {
    std::vector<std::string> f = split(rec, ',');
    if (f.size() != fields)
      throw UsageError("expected " + std::to_string(fields) + " fields per record, got '" + rec + "'");
    out.push_back(std::move(f));
  }
  return out;
}

std::string fmt_blocks(const std::vector<VfeBlockSpec>& blocks) {
  std::string s;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const VfeBlockSpec& b = blocks[i];
    s += (i ? "; " : "") + std::to_string(b.in_channels) + "," + std::to_string(b.out_channels) + "," +
         std::to_string(b.submanifold_layers) + "," + std::to_string(b.xy_stride) + "," +
         std::to_string(b.z_kernel) + "," + std::to_string(b.z_stride);
  }
  return s;
}

std::vector<VfeBlockSpec> to_blocks(const std::string& s) {
  std::vector<VfeBlockSpec> out;
  for (const auto& f : records(s, 6))
    out.push_back({to_int32(f[0]), to_int32(f[1]), to_int32(f[2]), to_int32(f[3]), to_int32(f[4]), to_int32(f[5])});
  return out;
}

std::string fmt_parts(const std::vector<PartSpec>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const PartSpec& p = parts[i];
    s += (i ? "; " : "") + std::to_string(p.lo) + "," + std::to_string(p.hi) + "," + std::to_string(p.kernel) +
         "," + std::to_string(p.dilation);
  }
  return s;
}

std::vector<PartSpec> to_parts(const std::string& s) {
  std::vector<PartSpec> out;
  for (const auto& f : records(s, 4)) out.push_back({to_int32(f[0]), to_int32(f[1]), to_int32(f[2]), to_int32(f[3])});
  return out;
}

std::string fmt_rules(const std::vector<DifficultyRule>& rules) {
  std::string s;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const DifficultyRule& r = rules[i];
    s += (i ? "; " : "") + r.name + "," + fmt(r.min_height) + "," + std::to_string(r.max_occlusion) + "," +
         fmt(r.max_truncation);
  }
  return s;
}

std::vector<DifficultyRule> to_rules(const std::string& s) {
  std::vector<DifficultyRule> out;
  for (const auto& f : records(s, 4)) {
    if (f[0].empty()) throw UsageError("difficulty name must not be empty");
    out.push_back({f[0], to_double(f[1]), to_int32(f[2]), to_double(f[3])});
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define VOXDET_FIELD(KEY, EXPR, PARSE) \
  Field { KEY, [](const RunConfig& c) { return fmt(c.EXPR); }, [](RunConfig& c, const std::string& v) { c.EXPR = PARSE(v); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"voxel.range_min", [](const RunConfig& c) { return fmt_triple(c.model.voxel.range_min); },
       [](RunConfig& c, const std::string& v) { c.model.voxel.range_min = to_triple(v); }},
      {"voxel.range_max", [](const RunConfig& c) { return fmt_triple(c.model.voxel.range_max); },
       [](RunConfig& c, const std::string& v) { c.model.voxel.range_max = to_triple(v); }},
      {"voxel.size", [](const RunConfig& c) { return fmt_triple(c.model.voxel.voxel_size); },
       [](RunConfig& c, const std::string& v) { c.model.voxel.voxel_size = to_triple(v); }},
      {"voxel.max_points", [](const RunConfig& c) { return std::to_string(c.model.voxel.max_points_per_voxel); },
       [](RunConfig& c, const std::string& v) { c.model.voxel.max_points_per_voxel = to_int32(v); }},
      {"voxel.seed", [](const RunConfig& c) { return std::to_string(c.model.voxel.seed); },
       [](RunConfig& c, const std::string& v) { c.model.voxel.seed = to_u64(v); }},
      {"vfe.blocks", [](const RunConfig& c) { return fmt_blocks(c.model.blocks); },
       [](RunConfig& c, const std::string& v) { c.model.blocks = to_blocks(v); }},
      VOXDET_FIELD("nn.bn_momentum", model.bn.momentum, to_double),
      VOXDET_FIELD("nn.bn_eps", model.bn.eps, to_double),
      {"nn.init_seed", [](const RunConfig& c) { return std::to_string(c.model.init_seed); },
       [](RunConfig& c, const std::string& v) { c.model.init_seed = to_u64(v); }},
      {"sce.seg_channels", [](const RunConfig& c) { return std::to_string(c.model.seg_channels); },
       [](RunConfig& c, const std::string& v) { c.model.seg_channels = to_int32(v); }},
      {"sce.det_channels", [](const RunConfig& c) { return std::to_string(c.model.det_channels); },
       [](RunConfig& c, const std::string& v) { c.model.det_channels = to_int32(v); }},
      {"sce.mask_kind", [](const RunConfig& c) { return to_string(c.model.mask_kind); },
       [](RunConfig& c, const std::string& v) { c.model.mask_kind = parse_mask_kind(trim(v)); }},
      {"sce.bev_stride", [](const RunConfig& c) { return std::to_string(c.model.bev_stride); },
       [](RunConfig& c, const std::string& v) { c.model.bev_stride = to_int32(v); }},
      {"head.parts", [](const RunConfig& c) { return fmt_parts(c.model.parts); },
       [](RunConfig& c, const std::string& v) { c.model.parts = to_parts(v); }},
      {"head.channels", [](const RunConfig& c) { return std::to_string(c.model.head_channels); },
       [](RunConfig& c, const std::string& v) { c.model.head_channels = to_int32(v); }},
      {"anchor.size", [](const RunConfig& c) { return fmt_list({c.model.anchor.w, c.model.anchor.l, c.model.anchor.h}); },
       [](RunConfig& c, const std::string& v) {
         const auto t = to_triple(v);
         c.model.anchor.w = t[0];
         c.model.anchor.l = t[1];
         c.model.anchor.h = t[2];
       }},
      VOXDET_FIELD("anchor.z", model.anchor.z, to_double),
      {"anchor.rotations", [](const RunConfig& c) { return fmt_list(c.model.anchor.rotations); },
       [](RunConfig& c, const std::string& v) { c.model.anchor.rotations = to_doubles(v); }},
      VOXDET_FIELD("assign.pos_iou", model.assign.pos_iou, to_double),
      VOXDET_FIELD("assign.neg_iou", model.assign.neg_iou, to_double),
      {"assign.iou_mode", [](const RunConfig& c) { return std::string(c.model.assign.iou == IouKind::k3d ? "3d" : "bev"); },
       [](RunConfig& c, const std::string& v) {
         const std::string t = trim(v);
         if (t == "3d") c.model.assign.iou = IouKind::k3d;
         else if (t == "bev") c.model.assign.iou = IouKind::kBev;
         else throw UsageError("assign.iou_mode must be 3d or bev, got '" + v + "'");
       }},
      VOXDET_FIELD("loss.lambda_loc", model.loss.loc, to_double),
      VOXDET_FIELD("loss.lambda_dir", model.loss.dir, to_double),
      VOXDET_FIELD("loss.lambda_seg", model.loss.seg, to_double),
      VOXDET_FIELD("loss.focal_alpha", model.loss.focal_alpha, to_double),
      VOXDET_FIELD("loss.focal_gamma", model.loss.focal_gamma, to_double),
      VOXDET_FIELD("infer.score_threshold", model.score_threshold, to_double),
      VOXDET_FIELD("infer.nms_iou", model.nms_iou, to_double),
      VOXDET_FIELD("optim.lr", train.optim.lr, to_double),
      VOXDET_FIELD("optim.weight_decay", train.optim.weight_decay, to_double),
      VOXDET_FIELD("optim.beta1", train.optim.beta1, to_double),
      VOXDET_FIELD("optim.beta2", train.optim.beta2, to_double),
      VOXDET_FIELD("optim.eps", train.optim.eps, to_double),
      {"train.steps", [](const RunConfig& c) { return std::to_string(c.train.steps); },
       [](RunConfig& c, const std::string& v) { c.train.steps = to_int32(v); }},
      {"train.seed", [](const RunConfig& c) { return std::to_string(c.train.seed); },
       [](RunConfig& c, const std::string& v) { c.train.seed = to_u64(v); }},
      {"data.scenes", [](const RunConfig& c) { return std::to_string(c.data.num_scenes); },
       [](RunConfig& c, const std::string& v) { c.data.num_scenes = to_int32(v); }},
      {"data.min_cars", [](const RunConfig& c) { return std::to_string(c.data.min_cars); },
       [](RunConfig& c, const std::string& v) { c.data.min_cars = to_int32(v); }},
      {"data.max_cars", [](const RunConfig& c) { return std::to_string(c.data.max_cars); },
       [](RunConfig& c, const std::string& v) { c.data.max_cars = to_int32(v); }},
      VOXDET_FIELD("data.ground_z", data.ground_z, to_double),
      VOXDET_FIELD("data.ground_density", data.ground_density, to_double),
      {"data.car_points", [](const RunConfig& c) { return std::to_string(c.data.car_points); },
       [](RunConfig& c, const std::string& v) { c.data.car_points = to_int32(v); }},
      {"data.seed", [](const RunConfig& c) { return std::to_string(c.data.seed); },
       [](RunConfig& c, const std::string& v) { c.data.seed = to_u64(v); }},
      VOXDET_FIELD("augment.enabled", train.augment.enabled, to_bool),
      VOXDET_FIELD("augment.gt_sampling", train.augment.gt_sampling, to_bool),
      {"augment.sample_count", [](const RunConfig& c) { return std::to_string(c.train.augment.sample_count); },
       [](RunConfig& c, const std::string& v) { c.train.augment.sample_count = to_int32(v); }},
      VOXDET_FIELD("augment.translate_var", train.augment.translate_var, to_double),
      VOXDET_FIELD("augment.box_rotation", train.augment.box_rotation, to_bool),
      VOXDET_FIELD("augment.box_yaw_range", train.augment.box_yaw_range, to_double),
      VOXDET_FIELD("augment.global_rotation", train.augment.global_rotation, to_bool),
      VOXDET_FIELD("augment.global_rot_range", train.augment.global_rot_range, to_double),
      {"ransac.iterations", [](const RunConfig& c) { return std::to_string(c.train.ransac.iterations); },
       [](RunConfig& c, const std::string& v) { c.train.ransac.iterations = to_int32(v); }},
      VOXDET_FIELD("ransac.inlier_tol", train.ransac.inlier_tol, to_double),
      {"ransac.seed", [](const RunConfig& c) { return std::to_string(c.train.ransac.seed); },
       [](RunConfig& c, const std::string& v) { c.train.ransac.seed = to_u64(v); }},
      {"eval.ap_mode", [](const RunConfig& c) { return to_string(c.eval.mode); },
       [](RunConfig& c, const std::string& v) { c.eval.mode = parse_ap_mode(trim(v)); }},
      VOXDET_FIELD("eval.iou_3d", eval.iou_3d, to_double),
      VOXDET_FIELD("eval.iou_bev", eval.iou_bev, to_double),
      {"eval.difficulties", [](const RunConfig& c) { return fmt_rules(c.eval.difficulties); },
       [](RunConfig& c, const std::string& v) { c.eval.difficulties = to_rules(v); }},
  };
  return f;
}

#undef VOXDET_FIELD

const Field& field(const std::string& key) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const Field& f : fields()) m[f.key] = &f;
    return m;
  }();
  auto it = index.find(key);
  if (it == index.end()) throw UsageError("unknown config key '" + key + "'");
  return *it->second;
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  if (name == "default") return c;
  if (name == "toy") {
    c.model.voxel.range_min = {0.0, -5.0, -3.0};
    c.model.voxel.range_max = {8.8, 5.0, 1.0};
    c.model.parts = {{0, 10, 1, 1}, {6, 16, 3, 1}, {12, 22, 3, 2}};
    // 200 steps is too short for 0.99 running stats to forget their init.
    c.model.bn.momentum = 0.9;
    return c;
  }
  throw UsageError("unknown preset '" + name + "' (expected default or toy)");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const Field& f : fields()) v.push_back(f.key);
    return v;
  }();
  return k;
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

void RunConfig::set(const std::string& key, const std::string& value) {
  try {
    field(key).set(*this, value);
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    if (msg.rfind("unknown config key", 0) == 0) throw;
    throw UsageError(key + ": " + msg);
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::merge(std::istream& in) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(number) + ": expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  merge(in);
}

void RunConfig::validate() const {
  model.validate();
  if (train.steps < 0) throw UsageError("train.steps must be >= 0");
  if (!(train.optim.lr >= 0) || !(train.optim.weight_decay >= 0) || !(train.optim.eps > 0) ||
      !(train.optim.beta1 >= 0 && train.optim.beta1 < 1) || !(train.optim.beta2 >= 0 && train.optim.beta2 < 1))
    throw UsageError("optim: lr, weight_decay >= 0, eps > 0, betas in [0, 1)");
  if (data.num_scenes < 0 || data.min_cars < 0 || data.max_cars < data.min_cars || data.car_points < 0 ||
      data.ground_density < 0)
    throw UsageError("data: counts must be nonnegative and min_cars <= max_cars");
  if (train.augment.translate_var < 0 || train.augment.box_yaw_range < 0 || train.augment.global_rot_range < 0 ||
      train.augment.sample_count < 0)
    throw UsageError("augment: ranges and counts must be nonnegative");
  if (train.ransac.iterations < 1 || !(train.ransac.inlier_tol > 0))
    throw UsageError("ransac: iterations >= 1 and inlier_tol > 0 required");
  if (!(eval.iou_3d > 0 && eval.iou_3d <= 1) || !(eval.iou_bev > 0 && eval.iou_bev <= 1))
    throw UsageError("eval IoU thresholds must lie in (0, 1]");
  if (eval.difficulties.empty()) throw UsageError("eval.difficulties must not be empty");
}

}  // namespace voxdet
