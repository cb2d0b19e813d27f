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

#include "voxdet/sparse_conv.hpp"

#include <algorithm>
#include <unordered_map>

namespace voxdet {

namespace {

std::uint64_t coord_key(int x, int y, int z, const std::array<int, 3>& shape) {
  return (static_cast<std::uint64_t>(z) * shape[1] + y) * shape[0] + x;
}

std::array<int, 3> output_shape(const std::array<int, 3>& shape, const SparseKernel& k) {
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) out[a] = (shape[a] + 2 * k.padding[a] - k.size[a]) / k.stride[a] + 1;
  return out;
}

}  // namespace

Rulebook build_rulebook(std::span<const VoxelIndex> sites, std::array<int, 3> shape,
                        const SparseKernel& kernel, SparseConvMode mode) {
  Rulebook rb;
  rb.kernel = kernel;
  rb.mode = mode;
  for (int a = 0; a < 3; ++a) {
    if (kernel.size[a] < 1 || kernel.stride[a] < 1 || kernel.padding[a] < 0)
      throw UsageError("sparse kernel sizes and strides must be >= 1");
  }
  if (mode == SparseConvMode::kSubmanifold) {
    for (int a = 0; a < 3; ++a) {
      if (kernel.size[a] % 2 == 0) throw UsageError("submanifold kernels must be odd");
      if (kernel.stride[a] != 1) throw UsageError("submanifold kernels must have unit stride");
      rb.kernel.padding[a] = kernel.size[a] / 2;
    }
    rb.out_shape = shape;
    rb.out_sites.assign(sites.begin(), sites.end());
  } else {
    rb.out_shape = output_shape(shape, kernel);
    for (int a = 0; a < 3; ++a)
      if (rb.out_shape[a] < 1) throw UsageError("strided sparse convolution output is empty");
    std::vector<std::uint64_t> keys;
    for (const VoxelIndex& s : sites) {
      const int in[3] = {s.x, s.y, s.z};
      // Per axis, the output coordinates whose window covers this input.
      std::array<std::vector<int>, 3> cand;
      for (int a = 0; a < 3; ++a) {
        for (int kp = 0; kp < kernel.size[a]; ++kp) {
          const int num = in[a] + kernel.padding[a] - kp;
          if (num < 0 || num % kernel.stride[a] != 0) continue;
          const int o = num / kernel.stride[a];
          if (o < rb.out_shape[a]) cand[a].push_back(o);
        }
      }
      for (int oz : cand[2])
        for (int oy : cand[1])
          for (int ox : cand[0]) keys.push_back(coord_key(ox, oy, oz, rb.out_shape));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    const auto nx = static_cast<std::uint64_t>(rb.out_shape[0]);
    const auto ny = static_cast<std::uint64_t>(rb.out_shape[1]);
    rb.out_sites.reserve(keys.size());
    for (auto k : keys)
      rb.out_sites.push_back({static_cast<int>(k % nx), static_cast<int>((k / nx) % ny),
                              static_cast<int>(k / (nx * ny))});
  }

  std::unordered_map<std::uint64_t, std::int32_t> lookup;
  lookup.reserve(sites.size() * 2);
  for (std::size_t i = 0; i < sites.size(); ++i)
    lookup.emplace(coord_key(sites[i].x, sites[i].y, sites[i].z, shape), static_cast<std::int32_t>(i));

  auto& plan = rb.plan;
  plan.num_in = static_cast<int>(sites.size());
  plan.num_out = static_cast<int>(rb.out_sites.size());
  const int volume = rb.kernel.volume();
  plan.pairs.assign(volume, {});
  const SparseKernel& k = rb.kernel;
#pragma omp parallel for schedule(dynamic, 1)
  for (int off = 0; off < volume; ++off) {
    const int kx = off % k.size[0];
    const int ky = (off / k.size[0]) % k.size[1];
    const int kz = off / (k.size[0] * k.size[1]);
    auto& list = plan.pairs[off];
    for (std::size_t o = 0; o < rb.out_sites.size(); ++o) {
      const VoxelIndex& s = rb.out_sites[o];
      const int ix = s.x * k.stride[0] - k.padding[0] + kx;
      const int iy = s.y * k.stride[1] - k.padding[1] + ky;
      const int iz = s.z * k.stride[2] - k.padding[2] + kz;
      if (ix < 0 || iy < 0 || iz < 0 || ix >= shape[0] || iy >= shape[1] || iz >= shape[2]) continue;
      auto it = lookup.find(coord_key(ix, iy, iz, shape));
      if (it != lookup.end()) list.emplace_back(it->second, static_cast<std::int32_t>(o));
    }
  }
  plan.index();
  return rb;
}

SparseVoxelGrid sparse_conv_forward(const SparseVoxelGrid& grid, std::span<const double> weights,
                                    std::span<const double> bias, int out_channels,
                                    const Rulebook& rb) {
  const int cin = grid.channels;
  if (static_cast<std::int64_t>(weights.size()) !=
      static_cast<std::int64_t>(rb.kernel.volume()) * cin * out_channels)
    throw UsageError("sparse_conv_forward: weight shape does not match kernel x in x out");
  if (!bias.empty() && static_cast<int>(bias.size()) != out_channels)
    throw UsageError("sparse_conv_forward: bias size mismatch");
  if (rb.plan.num_in != static_cast<int>(grid.size()))
    throw UsageError("sparse_conv_forward: rulebook built for a different grid");
  SparseVoxelGrid out;
  out.shape = rb.out_shape;
  out.channels = out_channels;
  out.sites = rb.out_sites;
  out.features.resize(out.sites.size() * out_channels);
  kernels::sparse_conv_forward(rb.plan, cin, out_channels, grid.features.data(), weights.data(),
                               bias.empty() ? nullptr : bias.data(), out.features.data());
  return out;
}

SparseConvGrads sparse_conv_backward(std::span<const double> upstream, const Rulebook& rb,
                                     const SparseVoxelGrid& input, std::span<const double> weights,
                                     int out_channels) {
  const int cin = input.channels;
  if (upstream.size() != rb.out_sites.size() * out_channels)
    throw UsageError("sparse_conv_backward: upstream gradient shape mismatch");
  SparseConvGrads g;
  g.input.assign(input.features.size(), 0.0);
  g.weight.assign(weights.size(), 0.0);
  g.bias.assign(out_channels, 0.0);
  kernels::sparse_conv_backward(rb.plan, cin, out_channels, input.features.data(), weights.data(),
                                upstream.data(), g.input.data(), g.weight.data(), g.bias.data());
  return g;
}

nn::Tensor sparse_conv(const nn::Tensor& features, const nn::Tensor& weight, const nn::Tensor& bias,
                       std::shared_ptr<const Rulebook> rb) {
  if (features.rank() != 2 || weight.rank() != 3)
    throw UsageError("sparse_conv: expected (sites, C) features and (K, Cin, Cout) weights");
  const int cin = static_cast<int>(features.dim(1));
  const int cout = static_cast<int>(weight.dim(2));
  if (weight.dim(0) != rb->kernel.volume() || weight.dim(1) != cin)
    throw UsageError("sparse_conv: weight shape does not match kernel volume / input channels");
  if (features.dim(0) != rb->plan.num_in)
    throw UsageError("sparse_conv: rulebook built for a different site count");
  std::vector<double> out(static_cast<std::size_t>(rb->plan.num_out) * cout);
  kernels::sparse_conv_forward(rb->plan, cin, cout, features.data().data(), weight.data().data(),
                               bias.defined() ? bias.data().data() : nullptr, out.data());
  return nn::make_op({rb->plan.num_out, cout}, std::move(out), {features, weight, bias},
                     [features, weight, bias, rb, cin, cout](std::span<const double> g) mutable {
                       double* gx = features.requires_grad() ? features.grad_mut().data() : nullptr;
                       double* gw = weight.requires_grad() ? weight.grad_mut().data() : nullptr;
                       double* gb = bias.requires_grad() ? bias.grad_mut().data() : nullptr;
                       kernels::sparse_conv_backward(rb->plan, cin, cout, features.data().data(),
                                                     weight.data().data(), g.data(), gx, gw, gb);
                     });
}

nn::Tensor scatter_bev(const nn::Tensor& features, std::span<const VoxelIndex> sites,
                       std::array<int, 3> shape) {
  if (features.rank() != 2 || features.dim(0) != static_cast<std::int64_t>(sites.size()))
    throw UsageError("scatter_bev: features do not match site count");
  const std::int64_t c = features.dim(1);
  const std::int64_t nx = shape[0], ny = shape[1], nz = shape[2];
  std::vector<std::int64_t> dst(sites.size() * c);
  for (std::size_t s = 0; s < sites.size(); ++s)
    for (std::int64_t ch = 0; ch < c; ++ch)
      dst[s * c + ch] = ((ch * nz + sites[s].z) * ny + sites[s].y) * nx + sites[s].x;
  std::vector<double> bev(static_cast<std::size_t>(c * nz * ny * nx), 0.0);
  auto f = features.data();
  for (std::size_t i = 0; i < dst.size(); ++i) bev[dst[i]] = f[i];
  return nn::make_op({1, c * nz, ny, nx}, std::move(bev), {features},
                     [features, dst = std::move(dst)](std::span<const double> g) mutable {
                       auto gf = features.grad_mut();
                       for (std::size_t i = 0; i < dst.size(); ++i) gf[i] += g[dst[i]];
                     });
}

std::vector<VfeBlockSpec> default_vfe_blocks() {
  return {{4, 16, 2, 2, 2, 2}, {16, 32, 2, 2, 2, 2}, {32, 64, 3, 2, 2, 2}, {64, 64, 3, 1, 3, 2}};
}

namespace {
SparseKernel strided_kernel(const VfeBlockSpec& b) {
  SparseKernel k;
  k.size = {b.xy_stride, b.xy_stride, b.z_kernel};
  k.stride = {b.xy_stride, b.xy_stride, b.z_stride};
  k.padding = {0, 0, 0};
  return k;
}
}  // namespace

std::array<int, 3> block_output_shape(std::array<int, 3> shape, const VfeBlockSpec& block) {
  return output_shape(shape, strided_kernel(block));
}

VoxelFeatureEncoder::VoxelFeatureEncoder(nn::ParamStore& store, const std::string& name,
                                         std::vector<VfeBlockSpec> blocks, nn::BatchNormOptions bn)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw UsageError("VFE needs at least one block");
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const VfeBlockSpec& spec = blocks_[b];
    if (spec.in_channels <= 0 || spec.out_channels <= 0 || spec.submanifold_layers < 0)
      throw UsageError("VFE block channels must be positive");
    if (spec.xy_stride < 1 || spec.xy_stride > 2 || spec.z_stride < 1 || spec.z_stride > 2 ||
        spec.z_kernel < 1)
      throw UsageError("VFE block strides must be 1 or 2");
    if (b > 0 && spec.in_channels != blocks_[b - 1].out_channels)
      throw UsageError("VFE block " + std::to_string(b + 1) + " expects " +
                       std::to_string(spec.in_channels) + " input channels but block " +
                       std::to_string(b) + " produces " + std::to_string(blocks_[b - 1].out_channels));
    const std::string prefix = name + ".block" + std::to_string(b + 1);
    int cin = spec.in_channels;
    for (int l = 0; l < spec.submanifold_layers; ++l) {
      const std::string ln = prefix + ".subm" + std::to_string(l + 1);
      Layer layer;
      layer.kernel = SparseKernel{};
      layer.mode = SparseConvMode::kSubmanifold;
      layer.weight = store.he_normal(ln + ".weight", {27, cin, spec.out_channels}, 27 * cin);
      layer.bn = nn::BatchNorm(store, ln + ".bn", spec.out_channels, bn);
      layers_.push_back(std::move(layer));
      cin = spec.out_channels;
    }
    const std::string ln = prefix + ".down";
    Layer layer;
    layer.kernel = strided_kernel(spec);
    layer.mode = SparseConvMode::kStrided;
    const int vol = layer.kernel.volume();
    layer.weight = store.he_normal(ln + ".weight", {vol, cin, spec.out_channels}, vol * cin);
    layer.bn = nn::BatchNorm(store, ln + ".bn", spec.out_channels, bn);
    layers_.push_back(std::move(layer));
  }
}

std::array<int, 3> VoxelFeatureEncoder::final_shape(std::array<int, 3> shape) const {
  for (const VfeBlockSpec& b : blocks_) shape = block_output_shape(shape, b);
  return shape;
}

int VoxelFeatureEncoder::bev_channels(std::array<int, 3> shape) const {
  return blocks_.back().out_channels * final_shape(shape)[2];
}

nn::FeatureMap VoxelFeatureEncoder::forward(const SparseVoxelGrid& grid, bool train) const {
  if (grid.channels != blocks_.front().in_channels)
    throw UsageError("VFE expects " + std::to_string(blocks_.front().in_channels) +
                     " input channels, grid has " + std::to_string(grid.channels));
  nn::Tensor x({static_cast<std::int64_t>(grid.size()), grid.channels}, grid.features);
  std::vector<VoxelIndex> sites = grid.sites;
  std::array<int, 3> shape = grid.shape;
  for (const Layer& layer : layers_) {
    auto rb = std::make_shared<Rulebook>(build_rulebook(sites, shape, layer.kernel, layer.mode));
    x = nn::relu(layer.bn(sparse_conv(x, layer.weight, nn::Tensor(), rb), train));
    sites = rb->out_sites;
    shape = rb->out_shape;
  }
  return scatter_bev(x, sites, shape);
}

std::vector<double> densify(const SparseVoxelGrid& grid) {
  const std::size_t plane = static_cast<std::size_t>(grid.shape[0]) * grid.shape[1] * grid.shape[2];
  std::vector<double> dense(plane * grid.channels, 0.0);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const std::uint64_t k = grid.key(grid.sites[s]);
    for (int c = 0; c < grid.channels; ++c) dense[c * plane + k] = grid.features[s * grid.channels + c];
  }
  return dense;
}

SparseVoxelGrid sparsify(std::span<const double> dense, std::array<int, 3> shape, int channels) {
  const std::size_t plane = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  if (dense.size() != plane * channels) throw UsageError("sparsify: dense size does not match shape");
  SparseVoxelGrid grid;
  grid.shape = shape;
  grid.channels = channels;
  for (std::size_t k = 0; k < plane; ++k) {
    bool active = false;
    for (int c = 0; c < channels && !active; ++c) active = dense[c * plane + k] != 0.0;
    if (!active) continue;
    grid.sites.push_back({static_cast<int>(k % shape[0]), static_cast<int>((k / shape[0]) % shape[1]),
                          static_cast<int>(k / (static_cast<std::size_t>(shape[0]) * shape[1]))});
    for (int c = 0; c < channels; ++c) grid.features.push_back(dense[c * plane + k]);
  }
  return grid;
}

nn::FeatureMap run_vfe(const SparseVoxelGrid& grid, const VoxelFeatureEncoder& vfe, bool train) {
  return vfe.forward(grid, train);
}

}  // namespace voxdet
