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

// Compute kernels behind the dense and sparse convolution ops. Each kernel
// has an OpenMP-parallel implementation and a serial reference used by the
// tests and the benchmark. Parallel kernels assign every output element to
// exactly one thread and accumulate in a fixed order, so results are
// bit-identical for any thread count.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace voxdet::kernels {

struct Conv2dDims {
  int batch = 1, in_channels = 1, height = 1, width = 1;
  int out_channels = 1, kernel = 1, stride = 1, padding = 0, dilation = 1;

  int out_height() const { return (height + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1; }
  int out_width() const { return (width + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1; }
};

/// y = conv(x, w) + b. Layouts: x (N, Cin, H, W), w (Cout, Cin, k, k),
/// y (N, Cout, Ho, Wo). `bias` may be null. y is overwritten.
void conv2d_forward(const Conv2dDims& d, const double* x, const double* w, const double* bias,
                    double* y);
void conv2d_forward_reference(const Conv2dDims& d, const double* x, const double* w,
                              const double* bias, double* y);

/// Accumulates gradients into any non-null destination.
void conv2d_backward(const Conv2dDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gbias);
void conv2d_backward_reference(const Conv2dDims& d, const double* x, const double* w,
                               const double* gy, double* gx, double* gw, double* gbias);

/// Gather-scatter plan for one sparse convolution. `pairs[k]` lists
/// (input ordinal, output ordinal) for kernel offset k, ordered by output.
/// The CSR views regroup the same triples per output and per input.
struct GatherPlan {
  int num_in = 0;
  int num_out = 0;
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> pairs;

  // by output: for output o, entries [out_ptr[o], out_ptr[o+1]) of (offset, input)
  std::vector<std::int64_t> out_ptr;
  std::vector<std::pair<std::int32_t, std::int32_t>> out_entries;
  // by input: for input i, entries [in_ptr[i], in_ptr[i+1]) of (offset, output)
  std::vector<std::int64_t> in_ptr;
  std::vector<std::pair<std::int32_t, std::int32_t>> in_entries;

  std::size_t num_offsets() const { return pairs.size(); }
  std::size_t num_pairs() const;
  /// Builds the CSR views from `pairs`.
  void index();
};

/// out (num_out x cout) = bias + sum over pairs of x[in] * w[offset];
/// w layout (offsets, cin, cout). `bias` may be null.
void sparse_conv_forward(const GatherPlan& plan, int cin, int cout, const double* x,
                         const double* w, const double* bias, double* out);
/// Serial loop over offsets and pairs in rulebook order.
void sparse_conv_forward_reference(const GatherPlan& plan, int cin, int cout, const double* x,
                                   const double* w, const double* bias, double* out);

/// Accumulates into any non-null destination.
void sparse_conv_backward(const GatherPlan& plan, int cin, int cout, const double* x,
                          const double* w, const double* gy, double* gx, double* gw,
                          double* gbias);
void sparse_conv_backward_reference(const GatherPlan& plan, int cin, int cout, const double* x,
                                    const double* w, const double* gy, double* gx, double* gw,
                                    double* gbias);

}  // namespace voxdet::kernels
