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

#include "voxdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "voxdet/common.hpp"
#include "voxdet/kernels.hpp"

namespace voxdet::nn {

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn fn;
};
}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + ")";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

void require_rank4(const Tensor& a, const char* op) {
  require(a.rank() == 4, std::string(op) + ": expected rank-4 tensor, got " + shape_str(a.shape()));
}

}  // namespace

std::int64_t numel_of(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  for (auto d : shape) require(d >= 0, "negative dimension in " + shape_str(shape));
  node_->value.assign(static_cast<std::size_t>(numel_of(shape)), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  require(static_cast<std::int64_t>(values.size()) == numel_of(shape),
          "value count does not match shape " + shape_str(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->value.size()); }
std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }

double Tensor::item() const {
  require(numel() == 1, "item() on tensor with " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

double Tensor::at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
  const Shape& s = shape();
  return node_->value[((n * s[1] + c) * s[2] + y) * s[3] + x];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::grad_mut() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const Tensor& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  for (const Tensor& p : parents)
    if (p.requires_grad()) out.node_->parents.push_back(p.node_);
  out.node_->fn = std::move(fn);
  return out;
}

void backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1, "backward requires a scalar loss");
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node_.get(), 0}};
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  detail::Node* root = loss.node_.get();
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->fn && !n->grad.empty()) n->fn(n->grad);
  }
}

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bd[i];
  return make_op(a.shape(), std::move(v), {a, b}, [a, b](std::span<const double> g) mutable {
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto dst = t->grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto ad = a.data(), bd = b.data();
  std::vector<double> v(ad.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i] * bd[i];
  return make_op(a.shape(), std::move(v), {a, b}, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto dst = a.grad_mut();
      auto o = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * o[i];
    }
    if (b.requires_grad()) {
      auto dst = b.grad_mut();
      auto o = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * o[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.data().begin(), a.data().end());
  for (double& x : v) x *= s;
  return make_op(a.shape(), std::move(v), {a}, [a, s](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * s;
  });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double x : a.data()) s += x;
  return make_op({1}, {s}, {a}, [a](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    for (double& d : dst) d += g[0];
  });
}

Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights) {
  require(terms.size() == weights.size(), "weighted_sum: term/weight count mismatch");
  double s = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) s += weights[i] * terms[i].item();
  std::vector<Tensor> parents(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return make_op({1}, {s}, parents, [parents, w](std::span<const double> g) mutable {
    for (std::size_t i = 0; i < parents.size(); ++i)
      if (parents[i].requires_grad()) parents[i].grad_mut()[0] += g[0] * w[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> v(a.data().begin(), a.data().end());
  for (double& x : v) x = x > 0 ? x : 0.0;
  return make_op(a.shape(), std::move(v), {a}, [a](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    auto x = a.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0) dst[i] += g[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  auto x = a.data();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  auto y = std::make_shared<std::vector<double>>(v);
  return make_op(a.shape(), std::move(v), {a}, [a, y](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (*y)[i] * (1 - (*y)[i]);
  });
}

Tensor softmax_channels(const Tensor& a) {
  require(a.rank() >= 2, "softmax_channels: rank must be >= 2");
  const std::int64_t n = a.dim(0), c = a.dim(1), inner = a.numel() / std::max<std::int64_t>(1, n * c);
  auto x = a.data();
  std::vector<double> v(x.size());
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t p = 0; p < inner; ++p) {
      const std::int64_t base = b * c * inner + p;
      double mx = -INFINITY;
      for (std::int64_t k = 0; k < c; ++k) mx = std::max(mx, x[base + k * inner]);
      double z = 0;
      for (std::int64_t k = 0; k < c; ++k) z += (v[base + k * inner] = std::exp(x[base + k * inner] - mx));
      for (std::int64_t k = 0; k < c; ++k) v[base + k * inner] /= z;
    }
  auto y = std::make_shared<std::vector<double>>(v);
  return make_op(a.shape(), std::move(v), {a}, [a, y, n, c, inner](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < inner; ++p) {
        const std::int64_t base = b * c * inner + p;
        double dot = 0;
        for (std::int64_t k = 0; k < c; ++k) dot += (*y)[base + k * inner] * g[base + k * inner];
        for (std::int64_t k = 0; k < c; ++k)
          dst[base + k * inner] += (*y)[base + k * inner] * (g[base + k * inner] - dot);
      }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dGeometry g) {
  require_rank4(x, "conv2d");
  require_rank4(weight, "conv2d weight");
  require(weight.dim(1) == x.dim(1), "conv2d: input has " + std::to_string(x.dim(1)) +
                                         " channels, weight expects " + std::to_string(weight.dim(1)));
  require(weight.dim(2) == weight.dim(3), "conv2d: square kernels only");
  require(g.stride >= 1 && g.dilation >= 1 && g.padding >= 0, "conv2d: bad geometry");
  kernels::Conv2dDims d;
  d.batch = static_cast<int>(x.dim(0));
  d.in_channels = static_cast<int>(x.dim(1));
  d.height = static_cast<int>(x.dim(2));
  d.width = static_cast<int>(x.dim(3));
  d.out_channels = static_cast<int>(weight.dim(0));
  d.kernel = static_cast<int>(weight.dim(2));
  d.stride = g.stride;
  d.padding = g.padding;
  d.dilation = g.dilation;
  if (bias.defined()) require(bias.numel() == d.out_channels, "conv2d: bias size mismatch");
  const int ho = d.height + 2 * d.padding - d.dilation * (d.kernel - 1) - 1;
  const int wo = d.width + 2 * d.padding - d.dilation * (d.kernel - 1) - 1;
  require(ho >= 0 && wo >= 0, "conv2d: output would be empty for input " + shape_str(x.shape()));
  Shape out_shape{d.batch, d.out_channels, d.out_height(), d.out_width()};
  std::vector<double> y(static_cast<std::size_t>(numel_of(out_shape)));
  kernels::conv2d_forward(d, x.data().data(), weight.data().data(),
                          bias.defined() ? bias.data().data() : nullptr, y.data());
  return make_op(std::move(out_shape), std::move(y), {x, weight, bias},
                 [x, weight, bias, d](std::span<const double> gy) mutable {
                   double* gx = x.requires_grad() ? x.grad_mut().data() : nullptr;
                   double* gw = weight.requires_grad() ? weight.grad_mut().data() : nullptr;
                   double* gb = bias.requires_grad() ? bias.grad_mut().data() : nullptr;
                   kernels::conv2d_backward(d, x.data().data(), weight.data().data(), gy.data(), gx,
                                            gw, gb);
                 });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool train, double momentum, double eps) {
  require(x.rank() == 2 || x.rank() == 4, "batch_norm: rank must be 2 or 4");
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  require(gamma.numel() == c && beta.numel() == c && running_mean.numel() == c &&
              running_var.numel() == c,
          "batch_norm: parameter size mismatch");
  const std::int64_t count = n * inner;
  auto xd = x.data();
  auto gd = gamma.data(), bd = beta.data();
  auto rm = running_mean.data(), rv = running_var.data();
  std::vector<double> y(xd.size());
  auto xhat = std::make_shared<std::vector<double>>(xd.size());
  auto inv_std = std::make_shared<std::vector<double>>(c);

#pragma omp parallel for schedule(static)
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (train) {
      double s = 0;
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t p = 0; p < inner; ++p) s += xd[(b * c + ch) * inner + p];
      mean = count ? s / count : 0.0;
      double q = 0;
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t p = 0; p < inner; ++p) {
          const double dlt = xd[(b * c + ch) * inner + p] - mean;
          q += dlt * dlt;
        }
      var = count ? q / count : 0.0;
      if (count > 0) {
        const double unbiased = count > 1 ? q / (count - 1) : var;
        rm[ch] = momentum * rm[ch] + (1 - momentum) * mean;
        rv[ch] = momentum * rv[ch] + (1 - momentum) * unbiased;
      }
    } else {
      mean = rm[ch];
      var = rv[ch];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[ch] = is;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < inner; ++p) {
        const std::int64_t i = (b * c + ch) * inner + p;
        (*xhat)[i] = (xd[i] - mean) * is;
        y[i] = gd[ch] * (*xhat)[i] + bd[ch];
      }
  }

  return make_op(x.shape(), std::move(y), {x, gamma, beta},
                 [x, gamma, beta, xhat, inv_std, n, c, inner, count, train](std::span<const double> g) mutable {
                   double* gx = x.requires_grad() ? x.grad_mut().data() : nullptr;
                   double* gg = gamma.requires_grad() ? gamma.grad_mut().data() : nullptr;
                   double* gb = beta.requires_grad() ? beta.grad_mut().data() : nullptr;
                   auto gam = gamma.data();
#pragma omp parallel for schedule(static)
                   for (std::int64_t ch = 0; ch < c; ++ch) {
                     double sg = 0, sgx = 0;
                     for (std::int64_t b = 0; b < n; ++b)
                       for (std::int64_t p = 0; p < inner; ++p) {
                         const std::int64_t i = (b * c + ch) * inner + p;
                         sg += g[i];
                         sgx += g[i] * (*xhat)[i];
                       }
                     if (gg) gg[ch] += sgx;
                     if (gb) gb[ch] += sg;
                     if (!gx || count == 0) continue;
                     const double k = gam[ch] * (*inv_std)[ch];
                     for (std::int64_t b = 0; b < n; ++b)
                       for (std::int64_t p = 0; p < inner; ++p) {
                         const std::int64_t i = (b * c + ch) * inner + p;
                         if (train)
                           gx[i] += k * (g[i] - sg / count - (*xhat)[i] * sgx / count);
                         else
                           gx[i] += k * g[i];
                       }
                   }
                 });
}

Tensor max_pool2(const Tensor& a) {
  require_rank4(a, "max_pool2");
  const std::int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const std::int64_t ho = h / 2, wo = w / 2;
  require(ho >= 1 && wo >= 1, "max_pool2: input too small " + shape_str(a.shape()));
  auto x = a.data();
  std::vector<double> v(static_cast<std::size_t>(n * c * ho * wo));
  auto arg = std::make_shared<std::vector<std::int64_t>>(v.size());
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t oy = 0; oy < ho; ++oy)
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        std::int64_t best = (p * h + 2 * oy) * w + 2 * ox;
        for (std::int64_t dy = 0; dy < 2; ++dy)
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t i = (p * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (x[i] > x[best]) best = i;
          }
        const std::int64_t o = (p * ho + oy) * wo + ox;
        v[o] = x[best];
        (*arg)[o] = best;
      }
  return make_op({n, c, ho, wo}, std::move(v), {a}, [a, arg](std::span<const double> g) mutable {
    auto dst = a.grad_mut();
    for (std::size_t o = 0; o < g.size(); ++o) dst[(*arg)[o]] += g[o];
  });
}

Tensor upsample_nearest2(const Tensor& a, std::int64_t out_h, std::int64_t out_w) {
  require_rank4(a, "upsample_nearest2");
  const std::int64_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  if (out_h < 0) out_h = 2 * h;
  if (out_w < 0) out_w = 2 * w;
  require(out_h >= 1 && out_w >= 1 && h >= 1 && w >= 1, "upsample_nearest2: empty tensor");
  auto src_row = [h](std::int64_t y) { return std::min(y / 2, h - 1); };
  auto src_col = [w](std::int64_t x) { return std::min(x / 2, w - 1); };
  auto x = a.data();
  std::vector<double> v(static_cast<std::size_t>(n * c * out_h * out_w));
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t oy = 0; oy < out_h; ++oy)
      for (std::int64_t ox = 0; ox < out_w; ++ox)
        v[(p * out_h + oy) * out_w + ox] = x[(p * h + src_row(oy)) * w + src_col(ox)];
  return make_op({n, c, out_h, out_w}, std::move(v), {a},
                 [a, n, c, h, w, out_h, out_w, src_row, src_col](std::span<const double> g) mutable {
                   auto dst = a.grad_mut();
                   for (std::int64_t p = 0; p < n * c; ++p)
                     for (std::int64_t oy = 0; oy < out_h; ++oy)
                       for (std::int64_t ox = 0; ox < out_w; ++ox)
                         dst[(p * h + src_row(oy)) * w + src_col(ox)] += g[(p * out_h + oy) * out_w + ox];
                 });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(a.numel() + b.numel()));
  auto ad = a.data(), bd = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    v.insert(v.end(), ad.begin() + i * ca * plane, ad.begin() + (i + 1) * ca * plane);
    v.insert(v.end(), bd.begin() + i * cb * plane, bd.begin() + (i + 1) * cb * plane);
  }
  return make_op({n, ca + cb, a.dim(2), a.dim(3)}, std::move(v), {a, b},
                 [a, b, n, ca, cb, plane](std::span<const double> g) mutable {
                   for (std::int64_t i = 0; i < n; ++i) {
                     const double* gi = g.data() + i * (ca + cb) * plane;
                     if (a.requires_grad()) {
                       auto dst = a.grad_mut();
                       for (std::int64_t k = 0; k < ca * plane; ++k) dst[i * ca * plane + k] += gi[k];
                     }
                     if (b.requires_grad()) {
                       auto dst = b.grad_mut();
                       for (std::int64_t k = 0; k < cb * plane; ++k)
                         dst[i * cb * plane + k] += gi[ca * plane + k];
                     }
                   }
                 });
}

Tensor slice_width(const Tensor& a, std::int64_t lo, std::int64_t hi) {
  require_rank4(a, "slice_width");
  const std::int64_t w = a.dim(3);
  require(0 <= lo && lo < hi && hi <= w, "slice_width: interval [" + std::to_string(lo) + ", " +
                                             std::to_string(hi) + ") outside width " + std::to_string(w));
  const std::int64_t rows = a.dim(0) * a.dim(1) * a.dim(2), sw = hi - lo;
  auto x = a.data();
  std::vector<double> v(static_cast<std::size_t>(rows * sw));
  for (std::int64_t r = 0; r < rows; ++r)
    std::copy(x.begin() + r * w + lo, x.begin() + r * w + hi, v.begin() + r * sw);
  return make_op({a.dim(0), a.dim(1), a.dim(2), sw}, std::move(v), {a},
                 [a, rows, w, lo, sw](std::span<const double> g) mutable {
                   auto dst = a.grad_mut();
                   for (std::int64_t r = 0; r < rows; ++r)
                     for (std::int64_t k = 0; k < sw; ++k) dst[r * w + lo + k] += g[r * sw + k];
                 });
}

Tensor reweight(const Tensor& f, const Tensor& m) {
  require_rank4(f, "reweight");
  require_rank4(m, "reweight");
  require(m.dim(1) == 1 && m.dim(0) == f.dim(0) && m.dim(2) == f.dim(2) && m.dim(3) == f.dim(3),
          "reweight: probability map " + shape_str(m.shape()) + " does not match features " +
              shape_str(f.shape()));
  const std::int64_t n = f.dim(0), c = f.dim(1), plane = f.dim(2) * f.dim(3);
  auto fd = f.data(), md = m.data();
  std::vector<double> v(fd.size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t p = 0; p < plane; ++p)
        v[(i * c + ch) * plane + p] = (1.0 + md[i * plane + p]) * fd[(i * c + ch) * plane + p];
  return make_op(f.shape(), std::move(v), {f, m}, [f, m, n, c, plane](std::span<const double> g) mutable {
    auto fd = f.data(), md = m.data();
    if (f.requires_grad()) {
      auto dst = f.grad_mut();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::int64_t k = (i * c + ch) * plane + p;
            dst[k] += (1.0 + md[i * plane + p]) * g[k];
          }
    }
    if (m.requires_grad()) {
      auto dst = m.grad_mut();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::int64_t k = (i * c + ch) * plane + p;
            dst[i * plane + p] += fd[k] * g[k];
          }
    }
  });
}

}  // namespace voxdet::nn
