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

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// Every op returns a new Tensor. When gradients are enabled and any input
// requires a gradient, the result records its inputs and a backward closure;
// `backward(loss)` then walks the recorded graph in reverse topological order
// and accumulates into each input's gradient buffer.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace voxdet::nn {

using Shape = std::vector<std::int64_t>;

std::int64_t numel_of(const Shape& s);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t i) const { return shape().at(i); }
  std::int64_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  /// Allocates a zeroed gradient buffer on first use.
  std::span<double> grad_mut() const;
  void zero_grad();

  /// Leaf copy of the values, outside any graph.
  Tensor detach() const;

  bool same_node(const Tensor& o) const { return node_ == o.node_; }

 private:
  friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>,
                        std::function<void(std::span<const double>)>);
  friend void backward(const Tensor& loss);
  std::shared_ptr<detail::Node> node_;
};

/// Rank-4 (batch, channels, height, width) tensor.
using FeatureMap = Tensor;

using BackwardFn = std::function<void(std::span<const double> out_grad)>;

/// Creates an op result. `fn` receives the result's gradient and must
/// accumulate into the parents it captured; it is dropped when no parent
/// requires a gradient or gradients are disabled.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn);

/// Reverse-mode accumulation from a single-element tensor. Throws UsageError
/// for non-scalar input.
void backward(const Tensor& loss);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---------------------------------------------------------------------------
// Ops.

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);
/// Sum of scalars weighted by constants.
Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Softmax along dimension 1.
Tensor softmax_channels(const Tensor& a);

struct Conv2dGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// Cross-correlation. x (N, Cin, H, W), weight (Cout, Cin, k, k), bias (Cout)
/// or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dGeometry g);

/// Normalizes over every dimension except 1. Train mode uses batch statistics
/// and blends them into the running buffers as
/// running = momentum * running + (1 - momentum) * batch; eval mode uses the
/// running buffers. Works for rank 2 (rows, C) and rank 4 (N, C, H, W).
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool train, double momentum = 0.99, double eps = 1e-5);

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped. Ties
/// route the gradient to the first maximum in row-major window order.
Tensor max_pool2(const Tensor& a);
/// Nearest-neighbour 2x upsampling. With explicit output sizes, source index
/// is min(i / 2, in - 1), which lets odd-sized pyramids line up again.
Tensor upsample_nearest2(const Tensor& a, std::int64_t out_h = -1, std::int64_t out_w = -1);
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Columns [lo, hi) of the last dimension of a rank-4 tensor.
Tensor slice_width(const Tensor& a, std::int64_t lo, std::int64_t hi);
/// R = (1 + M) * F with M (N, 1, H, W) broadcast over the channels of F.
Tensor reweight(const Tensor& f, const Tensor& m);

}  // namespace voxdet::nn
