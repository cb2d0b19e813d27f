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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "voxdet/tensor.hpp"

namespace voxdet::nn {

/// Named trainable parameters and non-trainable buffers, in registration
/// order. Tensors are handles, so layers holding them see loaded values.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// He-normal initialised parameter (std = sqrt(2 / fan_in)).
  Tensor he_normal(const std::string& name, Shape shape, std::int64_t fan_in);
  Tensor normal(const std::string& name, Shape shape, double stddev);
  Tensor constant(const std::string& name, Shape shape, double value, bool trainable = true);
  Tensor buffer(const std::string& name, Shape shape, double value);

  std::vector<Tensor> trainable() const;
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::int64_t trainable_count() const;

  void zero_grad();

  /// Flat binary checkpoint. Per tensor: u32 name length, name bytes, u32
  /// rank, rank x i64 dims, then the values as little-endian f64.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Overwrites values in place; every stored name must be present with a
  /// matching shape, and vice versa.
  void load(std::istream& in);
  void load(const std::filesystem::path& path);

 private:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable;
  };
  Tensor& add(const std::string& name, Tensor t, bool trainable);

  std::vector<Entry> entries_;
  std::mt19937_64 rng_;
};

struct BatchNormOptions {
  double momentum = 0.99;
  double eps = 1e-5;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& name, std::int64_t channels, BatchNormOptions opt);
  Tensor operator()(const Tensor& x, bool train) const;

 private:
  Tensor gamma_, beta_;
  mutable Tensor running_mean_, running_var_;
  BatchNormOptions opt_;
};

class Conv2d {
 public:
  Conv2d() = default;
  /// He-normal weights, or N(0, init_std^2) when init_std > 0.
  Conv2d(ParamStore& store, const std::string& name, std::int64_t in, std::int64_t out, int kernel,
         Conv2dGeometry geom, bool bias, double init_std = 0.0);
  Tensor operator()(const Tensor& x) const;
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_, bias_;
  Conv2dGeometry geom_;
};

/// conv -> batch norm -> relu, with the conv bias disabled.
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(ParamStore& store, const std::string& name, std::int64_t in, std::int64_t out,
             int kernel, Conv2dGeometry geom, BatchNormOptions bn);
  Tensor operator()(const Tensor& x, bool train) const;

 private:
  Conv2d conv_;
  BatchNorm bn_;
};

struct AdamWConfig {
  double lr = 2.25e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  std::vector<std::vector<double>> m, v;
  std::int64_t step = 0;
};

/// Decoupled weight decay: w <- w - lr*wd*w, then the bias-corrected Adam
/// update. A parameter without an accumulated gradient is treated as having
/// a zero gradient.
void adamw_step(std::span<Tensor> params, AdamWState& state, const AdamWConfig& cfg);

}  // namespace voxdet::nn
