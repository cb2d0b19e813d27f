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

#include <omp.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "voxdet/tensor.hpp"

namespace voxdet::testing {

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1,
                                bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(nn::numel_of(shape)));
  for (double& x : v) x = u(rng);
  return nn::Tensor(std::move(shape), std::move(v), grad);
}

/// Scalar probe sum(w * y) with fixed random weights, so every output
/// element receives a distinct upstream gradient.
inline nn::Tensor probe(const nn::Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  nn::Tensor w = random_tensor(y.shape(), rng, -1, 1, false);
  return nn::sum(nn::mul(y, w));
}

/// Worst relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// over `inputs`, with central differences of step `h`.
inline double gradient_error(const std::function<nn::Tensor()>& loss, std::vector<nn::Tensor> inputs,
                             double h = 1e-6) {
  for (nn::Tensor& t : inputs) t.zero_grad();
  nn::backward(loss());
  double worst = 0;
  for (nn::Tensor& t : inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<double> numeric(t.numel());
    auto d = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      const double keep = d[i];
      double lp, lm;
      {
        nn::NoGradGuard g;
        d[i] = keep + h;
        lp = loss().item();
        d[i] = keep - h;
        lm = loss().item();
      }
      d[i] = keep;
      numeric[i] = (lp - lm) / (2 * h);
    }
    double diff = 0, na = 0, nn_ = 0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn_ += numeric[i] * numeric[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn_));
    const double err = scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

/// Relative error of directional derivatives along `directions` random unit
/// perturbations of all `inputs` jointly; for graphs too large for a
/// per-coordinate sweep.
inline double directional_gradient_error(const std::function<nn::Tensor()>& loss,
                                         std::vector<nn::Tensor> inputs, int directions,
                                         std::uint64_t seed, double h = 1e-6) {
  for (nn::Tensor& t : inputs) t.zero_grad();
  nn::backward(loss());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0;
  for (int d = 0; d < directions; ++d) {
    std::vector<std::vector<double>> dir;
    double norm2 = 0;
    for (const nn::Tensor& t : inputs) {
      dir.emplace_back(static_cast<std::size_t>(t.numel()));
      for (double& v : dir.back()) {
        v = nd(rng);
        norm2 += v * v;
      }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    double analytic = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto g = inputs[k].grad();
      for (std::size_t i = 0; i < dir[k].size(); ++i) {
        dir[k][i] *= inv;
        if (!g.empty()) analytic += g[i] * dir[k][i];
      }
    }
    std::vector<std::vector<double>> orig;
    for (const nn::Tensor& t : inputs) orig.emplace_back(t.data().begin(), t.data().end());
    auto shift = [&](double step) {
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto x = inputs[k].data();
        for (std::size_t i = 0; i < dir[k].size(); ++i) x[i] = orig[k][i] + step * dir[k][i];
      }
    };
    double lp, lm;
    {
      nn::NoGradGuard g;
      shift(h);
      lp = loss().item();
      shift(-h);
      lm = loss().item();
      shift(0);
    }
    const double numeric = (lp - lm) / (2 * h);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    worst = std::max(worst, scale < 1e-12 ? std::abs(analytic - numeric)
                                          : std::abs(analytic - numeric) / scale);
  }
  return worst;
}

// Sets the OpenMP thread count for one scope.
struct ThreadScope {
  explicit ThreadScope(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadScope() { omp_set_num_threads(saved); }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;
  int saved;
};

}  // namespace voxdet::testing
