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

#include "voxdet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "voxdet/common.hpp"

namespace voxdet::nn {

Tensor& ParamStore::add(const std::string& name, Tensor t, bool trainable) {
  for (const Entry& e : entries_)
    if (e.name == name) throw UsageError("duplicate parameter name " + name);
  t.set_requires_grad(trainable);
  entries_.push_back({name, std::move(t), trainable});
  return entries_.back().tensor;
}

Tensor ParamStore::he_normal(const std::string& name, Shape shape, std::int64_t fan_in) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(std::max<std::int64_t>(1, fan_in))));
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (double& x : v) x = dist(rng_);
  return add(name, Tensor(std::move(shape), std::move(v)), true);
}

Tensor ParamStore::normal(const std::string& name, Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (double& x : v) x = dist(rng_);
  return add(name, Tensor(std::move(shape), std::move(v)), true);
}

Tensor ParamStore::constant(const std::string& name, Shape shape, double value, bool trainable) {
  return add(name, Tensor(std::move(shape), value), trainable);
}

Tensor ParamStore::buffer(const std::string& name, Shape shape, double value) {
  return add(name, Tensor(std::move(shape), value), false);
}

std::vector<Tensor> ParamStore::trainable() const {
  std::vector<Tensor> out;
  for (const Entry& e : entries_)
    if (e.trainable) out.push_back(e.tensor);
  return out;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return e.tensor;
  throw UsageError("unknown parameter " + name);
}

std::int64_t ParamStore::trainable_count() const {
  std::int64_t n = 0;
  for (const Entry& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get_raw(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint truncated");
  return v;
}

}  // namespace

void ParamStore::save(std::ostream& out) const {
  for (const Entry& e : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) put<std::int64_t>(out, d);
    const auto vals = e.tensor.data();
    out.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size_bytes()));
  }
}

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save(out);
  if (!out) throw DataError("write failed: " + path.string());
}

void ParamStore::load(std::istream& in) {
  std::map<std::string, Entry*> by_name;
  for (Entry& e : entries_) by_name[e.name] = &e;
  std::size_t loaded = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get_raw<std::uint32_t>(in);
    if (len > (1u << 16)) throw DataError("checkpoint name length out of range");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("checkpoint truncated");
    const auto rank = get_raw<std::uint32_t>(in);
    if (rank > 8) throw DataError("checkpoint rank out of range for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_raw<std::int64_t>(in);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint has unknown tensor " + name);
    Tensor& t = it->second->tensor;
    if (t.shape() != shape) throw DataError("checkpoint shape mismatch for " + name);
    auto vals = t.data();
    if (!in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size_bytes())))
      throw DataError("checkpoint truncated");
    by_name.erase(it);
    ++loaded;
  }
  if (!by_name.empty()) throw DataError("checkpoint is missing tensor " + by_name.begin()->first);
  (void)loaded;
}

void ParamStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  load(in);
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name, std::int64_t channels,
                     BatchNormOptions opt)
    : gamma_(store.constant(name + ".gamma", {channels}, 1.0)),
      beta_(store.constant(name + ".beta", {channels}, 0.0)),
      running_mean_(store.buffer(name + ".running_mean", {channels}, 0.0)),
      running_var_(store.buffer(name + ".running_var", {channels}, 1.0)),
      opt_(opt) {}

Tensor BatchNorm::operator()(const Tensor& x, bool train) const {
  return batch_norm(x, gamma_, beta_, running_mean_, running_var_, train, opt_.momentum, opt_.eps);
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, std::int64_t in, std::int64_t out,
               int kernel, Conv2dGeometry geom, bool bias, double init_std)
    : weight_(init_std > 0 ? store.normal(name + ".weight", {out, in, kernel, kernel}, init_std)
                           : store.he_normal(name + ".weight", {out, in, kernel, kernel}, in * kernel * kernel)),
      geom_(geom) {
  if (bias) bias_ = store.constant(name + ".bias", {out}, 0.0);
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight_, bias_, geom_); }

ConvBnRelu::ConvBnRelu(ParamStore& store, const std::string& name, std::int64_t in,
                       std::int64_t out, int kernel, Conv2dGeometry geom, BatchNormOptions bn)
    : conv_(store, name + ".conv", in, out, kernel, geom, false), bn_(store, name + ".bn", out, bn) {}

Tensor ConvBnRelu::operator()(const Tensor& x, bool train) const {
  return relu(bn_(conv_(x), train));
}

void adamw_step(std::span<Tensor> params, AdamWState& state, const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      state.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw UsageError("adamw_step: state does not match params");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != w.size()) throw UsageError("adamw_step: state shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      w[k] -= cfg.lr * cfg.weight_decay * w[k];
      m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * gk * gk;
      w[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
    }
  }
}

}  // namespace voxdet::nn
