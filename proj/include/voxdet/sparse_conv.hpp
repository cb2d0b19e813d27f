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

#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "voxdet/kernels.hpp"
#include "voxdet/layers.hpp"
#include "voxdet/voxel_grid.hpp"

namespace voxdet {

enum class SparseConvMode { kSubmanifold, kStrided };

/// Per-axis (x, y, z) kernel geometry. Submanifold mode requires odd sizes
/// and unit stride and pads by size / 2 so sites map onto themselves.
struct SparseKernel {
  std::array<int, 3> size{3, 3, 3};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{0, 0, 0};

  int volume() const { return size[0] * size[1] * size[2]; }
};

/// Gather-scatter plan plus the output site set it writes. Offset ordinal k
/// enumerates kernel positions as (kz * size_y + ky) * size_x + kx.
struct Rulebook {
  kernels::GatherPlan plan;
  SparseKernel kernel;
  SparseConvMode mode = SparseConvMode::kSubmanifold;
  std::array<int, 3> out_shape{0, 0, 0};
  std::vector<VoxelIndex> out_sites;  // sorted by (z, y, x)
};

/// Submanifold: output sites are the input sites and a pair is emitted when
/// input = output + (k - size/2). Strided: output sites are every output
/// coordinate whose receptive field holds an input site; with kernel equal to
/// stride this is the set of floor-divided input coordinates.
Rulebook build_rulebook(std::span<const VoxelIndex> sites, std::array<int, 3> shape,
                        const SparseKernel& kernel, SparseConvMode mode);

/// Weight layout (offsets, in, out). `bias` may be empty.
SparseVoxelGrid sparse_conv_forward(const SparseVoxelGrid& grid, std::span<const double> weights,
                                    std::span<const double> bias, int out_channels,
                                    const Rulebook& rb);

struct SparseConvGrads {
  std::vector<double> input;
  std::vector<double> weight;
  std::vector<double> bias;
};

SparseConvGrads sparse_conv_backward(std::span<const double> upstream, const Rulebook& rb,
                                     const SparseVoxelGrid& input, std::span<const double> weights,
                                     int out_channels);

/// Differentiable sparse convolution over a (sites, Cin) feature matrix.
nn::Tensor sparse_conv(const nn::Tensor& features, const nn::Tensor& weight, const nn::Tensor& bias,
                       std::shared_ptr<const Rulebook> rb);

/// Densifies (sites, C) features into a (1, C * nz, ny, nx) BEV map with
/// channel c * nz + z.
nn::Tensor scatter_bev(const nn::Tensor& features, std::span<const VoxelIndex> sites,
                       std::array<int, 3> shape);

/// "(in, out, layers, stride)" block: `layers` submanifold 3x3x3 convolutions
/// then one strided layer with kernel = stride in x/y and (z_kernel, z_stride)
/// along z. Every layer is followed by batch norm and ReLU.
struct VfeBlockSpec {
  int in_channels = 4;
  int out_channels = 16;
  int submanifold_layers = 2;
  int xy_stride = 2;
  int z_kernel = 2;
  int z_stride = 2;

  bool operator==(const VfeBlockSpec&) const = default;
};

std::vector<VfeBlockSpec> default_vfe_blocks();

/// Grid shape after the strided layer of `block`.
std::array<int, 3> block_output_shape(std::array<int, 3> shape, const VfeBlockSpec& block);

class VoxelFeatureEncoder {
 public:
  VoxelFeatureEncoder(nn::ParamStore& store, const std::string& name,
                      std::vector<VfeBlockSpec> blocks, nn::BatchNormOptions bn);

  /// Channels of the BEV map produced for a grid of `shape`.
  int bev_channels(std::array<int, 3> shape) const;
  std::array<int, 3> final_shape(std::array<int, 3> shape) const;

  nn::FeatureMap forward(const SparseVoxelGrid& grid, bool train) const;

 private:
  struct Layer {
    nn::Tensor weight;
    nn::BatchNorm bn;
    SparseKernel kernel;
    SparseConvMode mode;
  };
  std::vector<VfeBlockSpec> blocks_;
  std::vector<Layer> layers_;
};

/// Dense (C, nz, ny, nx) copy of a grid's features.
std::vector<double> densify(const SparseVoxelGrid& grid);

/// Sites whose feature vector has any nonzero entry, in (z, y, x) order.
SparseVoxelGrid sparsify(std::span<const double> dense, std::array<int, 3> shape, int channels);

nn::FeatureMap run_vfe(const SparseVoxelGrid& grid, const VoxelFeatureEncoder& vfe, bool train);

}  // namespace voxdet
