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

#include "voxdet/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>

namespace voxdet::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using Map = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

// Fixed partition sizes. They depend only on the problem shape, never on the
// thread count, so the GEMM blocking and summation order stay the same.
constexpr int kChannelChunk = 16;
constexpr std::int64_t kColumnBudget = 1 << 22;  // doubles per im2col tile

struct Tiling {
  int rows_per_tile;
  int tiles;
};

Tiling tile_rows(const Conv2dDims& d) {
  const std::int64_t r = static_cast<std::int64_t>(d.in_channels) * d.kernel * d.kernel;
  const int ho = d.out_height(), wo = d.out_width();
  const std::int64_t per_row = r * wo;
  int rows = static_cast<int>(std::max<std::int64_t>(1, kColumnBudget / std::max<std::int64_t>(1, per_row)));
  rows = std::min(rows, ho);
  return {rows, (ho + rows - 1) / rows};
}

bool is_pointwise(const Conv2dDims& d) {
  return d.kernel == 1 && d.stride == 1 && d.padding == 0;
}

// cols (Cin*k*k, rows*Wo) for output rows [row0, row0 + rows) of one image.
void im2col(const Conv2dDims& d, const double* x, int row0, int rows, double* cols) {
  const int kk = d.kernel * d.kernel;
  const int wo = d.out_width();
  const int t = rows * wo;
  const int r_total = d.in_channels * kk;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < r_total; ++r) {
    const int ci = r / kk, ky = (r % kk) / d.kernel, kx = r % d.kernel;
    const double* xc = x + static_cast<std::int64_t>(ci) * d.height * d.width;
    double* dst = cols + static_cast<std::int64_t>(r) * t;
    for (int oy = 0; oy < rows; ++oy) {
      const int iy = (row0 + oy) * d.stride - d.padding + ky * d.dilation;
      double* drow = dst + oy * wo;
      if (iy < 0 || iy >= d.height) {
        std::fill(drow, drow + wo, 0.0);
        continue;
      }
      const double* xrow = xc + static_cast<std::int64_t>(iy) * d.width;
      for (int ox = 0; ox < wo; ++ox) {
        const int ix = ox * d.stride - d.padding + kx * d.dilation;
        drow[ox] = (ix >= 0 && ix < d.width) ? xrow[ix] : 0.0;
      }
    }
  }
}

// Scatter-adds cols back into gx; parallel over input channels so each
// channel's rows are owned by one thread.
void col2im_add(const Conv2dDims& d, const double* cols, int row0, int rows, double* gx) {
  const int kk = d.kernel * d.kernel;
  const int wo = d.out_width();
  const int t = rows * wo;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < d.in_channels; ++ci) {
    double* gc = gx + static_cast<std::int64_t>(ci) * d.height * d.width;
    for (int k = 0; k < kk; ++k) {
      const int ky = k / d.kernel, kx = k % d.kernel;
      const double* src = cols + static_cast<std::int64_t>(ci * kk + k) * t;
      for (int oy = 0; oy < rows; ++oy) {
        const int iy = (row0 + oy) * d.stride - d.padding + ky * d.dilation;
        if (iy < 0 || iy >= d.height) continue;
        double* grow = gc + static_cast<std::int64_t>(iy) * d.width;
        const double* srow = src + oy * wo;
        for (int ox = 0; ox < wo; ++ox) {
          const int ix = ox * d.stride - d.padding + kx * d.dilation;
          if (ix >= 0 && ix < d.width) grow[ix] += srow[ox];
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const Conv2dDims& d, const double* x, const double* w, const double* bias,
                    double* y) {
  const int r = d.in_channels * d.kernel * d.kernel;
  const int ho = d.out_height(), wo = d.out_width();
  const std::int64_t plane_out = static_cast<std::int64_t>(ho) * wo;
  const std::int64_t plane_in = static_cast<std::int64_t>(d.height) * d.width;
  const Tiling tiling = tile_rows(d);
  const bool pointwise = is_pointwise(d);
  std::vector<double> cols;
  if (!pointwise) cols.resize(static_cast<std::size_t>(r) * tiling.rows_per_tile * wo);
  const int chunks = (d.out_channels + kChannelChunk - 1) / kChannelChunk;

  for (int n = 0; n < d.batch; ++n) {
    const double* xn = x + n * d.in_channels * plane_in;
    double* yn = y + n * d.out_channels * plane_out;
    for (int tile = 0; tile < tiling.tiles; ++tile) {
      const int row0 = tile * tiling.rows_per_tile;
      const int rows = std::min(tiling.rows_per_tile, ho - row0);
      const int t = rows * wo;
      const double* src = xn + static_cast<std::int64_t>(row0) * wo;
      std::int64_t src_stride = plane_in;
      if (!pointwise) {
        im2col(d, xn, row0, rows, cols.data());
        src = cols.data();
        src_stride = t;
      }
      MapC cm(src, r, t, Eigen::OuterStride<>(src_stride));
#pragma omp parallel for schedule(static)
      for (int c = 0; c < chunks; ++c) {
        const int co0 = c * kChannelChunk;
        const int nco = std::min(kChannelChunk, d.out_channels - co0);
        MapC wm(w + static_cast<std::int64_t>(co0) * r, nco, r, Eigen::OuterStride<>(r));
        Map ym(yn + co0 * plane_out + static_cast<std::int64_t>(row0) * wo, nco, t,
               Eigen::OuterStride<>(plane_out));
        ym.noalias() = wm * cm;
        if (bias) {
          for (int i = 0; i < nco; ++i) ym.row(i).array() += bias[co0 + i];
        }
      }
    }
  }
}

void conv2d_backward(const Conv2dDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gbias) {
  const int r = d.in_channels * d.kernel * d.kernel;
  const int ho = d.out_height(), wo = d.out_width();
  const std::int64_t plane_out = static_cast<std::int64_t>(ho) * wo;
  const std::int64_t plane_in = static_cast<std::int64_t>(d.height) * d.width;
  const Tiling tiling = tile_rows(d);
  const bool pointwise = is_pointwise(d);
  const int co_chunks = (d.out_channels + kChannelChunk - 1) / kChannelChunk;
  const int r_chunks = (r + kChannelChunk - 1) / kChannelChunk;
  std::vector<double> cols, gcols;
  if (!pointwise) {
    cols.resize(static_cast<std::size_t>(r) * tiling.rows_per_tile * wo);
    if (gx) gcols.resize(cols.size());
  }

  if (gbias) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.out_channels; ++co) {
      double s = 0;
      for (int n = 0; n < d.batch; ++n) {
        const double* g = gy + (static_cast<std::int64_t>(n) * d.out_channels + co) * plane_out;
        for (std::int64_t p = 0; p < plane_out; ++p) s += g[p];
      }
      gbias[co] += s;
    }
  }

  for (int n = 0; n < d.batch; ++n) {
    const double* xn = x + n * d.in_channels * plane_in;
    const double* gyn = gy + n * d.out_channels * plane_out;
    double* gxn = gx ? gx + n * d.in_channels * plane_in : nullptr;
    for (int tile = 0; tile < tiling.tiles; ++tile) {
      const int row0 = tile * tiling.rows_per_tile;
      const int rows = std::min(tiling.rows_per_tile, ho - row0);
      const int t = rows * wo;
      const double* gyt = gyn + static_cast<std::int64_t>(row0) * wo;
      MapC gym_all(gyt, d.out_channels, t, Eigen::OuterStride<>(plane_out));

      if (gw) {
        const double* src = xn + static_cast<std::int64_t>(row0) * wo;
        std::int64_t src_stride = plane_in;
        if (!pointwise) {
          im2col(d, xn, row0, rows, cols.data());
          src = cols.data();
          src_stride = t;
        }
        MapC cm(src, r, t, Eigen::OuterStride<>(src_stride));
#pragma omp parallel for schedule(static)
        for (int c = 0; c < co_chunks; ++c) {
          const int co0 = c * kChannelChunk;
          const int nco = std::min(kChannelChunk, d.out_channels - co0);
          Map gwm(gw + static_cast<std::int64_t>(co0) * r, nco, r, Eigen::OuterStride<>(r));
          gwm.noalias() += gym_all.middleRows(co0, nco) * cm.transpose();
        }
      }

      if (gxn) {
        MapC wm(w, d.out_channels, r, Eigen::OuterStride<>(r));
        if (pointwise) {
          // gx rows are the input channels directly.
#pragma omp parallel for schedule(static)
          for (int c = 0; c < r_chunks; ++c) {
            const int r0 = c * kChannelChunk;
            const int nr = std::min(kChannelChunk, r - r0);
            Map gxm(gxn + r0 * plane_in + static_cast<std::int64_t>(row0) * wo, nr, t,
                    Eigen::OuterStride<>(plane_in));
            gxm.noalias() += wm.middleCols(r0, nr).transpose() * gym_all;
          }
        } else {
#pragma omp parallel for schedule(static)
          for (int c = 0; c < r_chunks; ++c) {
            const int r0 = c * kChannelChunk;
            const int nr = std::min(kChannelChunk, r - r0);
            Map gcm(gcols.data() + static_cast<std::int64_t>(r0) * t, nr, t, Eigen::OuterStride<>(t));
            gcm.noalias() = wm.middleCols(r0, nr).transpose() * gym_all;
          }
          col2im_add(d, gcols.data(), row0, rows, gxn);
        }
      }
    }
  }
}

void conv2d_forward_reference(const Conv2dDims& d, const double* x, const double* w,
                              const double* bias, double* y) {
  const int ho = d.out_height(), wo = d.out_width();
  for (int n = 0; n < d.batch; ++n)
    for (int co = 0; co < d.out_channels; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = bias ? bias[co] : 0.0;
          for (int ci = 0; ci < d.in_channels; ++ci)
            for (int ky = 0; ky < d.kernel; ++ky)
              for (int kx = 0; kx < d.kernel; ++kx) {
                const int iy = oy * d.stride - d.padding + ky * d.dilation;
                const int ix = ox * d.stride - d.padding + kx * d.dilation;
                if (iy < 0 || iy >= d.height || ix < 0 || ix >= d.width) continue;
                s += w[((co * d.in_channels + ci) * d.kernel + ky) * d.kernel + kx] *
                     x[((static_cast<std::int64_t>(n) * d.in_channels + ci) * d.height + iy) * d.width + ix];
              }
          y[((static_cast<std::int64_t>(n) * d.out_channels + co) * ho + oy) * wo + ox] = s;
        }
}

void conv2d_backward_reference(const Conv2dDims& d, const double* x, const double* w,
                               const double* gy, double* gx, double* gw, double* gbias) {
  const int ho = d.out_height(), wo = d.out_width();
  for (int n = 0; n < d.batch; ++n)
    for (int co = 0; co < d.out_channels; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const double g = gy[((static_cast<std::int64_t>(n) * d.out_channels + co) * ho + oy) * wo + ox];
          if (gbias) gbias[co] += g;
          for (int ci = 0; ci < d.in_channels; ++ci)
            for (int ky = 0; ky < d.kernel; ++ky)
              for (int kx = 0; kx < d.kernel; ++kx) {
                const int iy = oy * d.stride - d.padding + ky * d.dilation;
                const int ix = ox * d.stride - d.padding + kx * d.dilation;
                if (iy < 0 || iy >= d.height || ix < 0 || ix >= d.width) continue;
                const std::int64_t wi = ((co * d.in_channels + ci) * d.kernel + ky) * d.kernel + kx;
                const std::int64_t xi =
                    ((static_cast<std::int64_t>(n) * d.in_channels + ci) * d.height + iy) * d.width + ix;
                if (gw) gw[wi] += g * x[xi];
                if (gx) gx[xi] += g * w[wi];
              }
        }
}

// ---------------------------------------------------------------------------

std::size_t GatherPlan::num_pairs() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

void GatherPlan::index() {
  out_ptr.assign(static_cast<std::size_t>(num_out) + 1, 0);
  in_ptr.assign(static_cast<std::size_t>(num_in) + 1, 0);
  for (const auto& list : pairs)
    for (auto [i, o] : list) {
      ++out_ptr[o + 1];
      ++in_ptr[i + 1];
    }
  for (int o = 0; o < num_out; ++o) out_ptr[o + 1] += out_ptr[o];
  for (int i = 0; i < num_in; ++i) in_ptr[i + 1] += in_ptr[i];
  out_entries.resize(out_ptr.back());
  in_entries.resize(in_ptr.back());
  std::vector<std::int64_t> fill_out(out_ptr.begin(), out_ptr.end() - 1);
  std::vector<std::int64_t> fill_in(in_ptr.begin(), in_ptr.end() - 1);
  // Offsets are visited in ascending order, so every CSR row is sorted by offset.
  for (std::size_t k = 0; k < pairs.size(); ++k)
    for (auto [i, o] : pairs[k]) {
      out_entries[fill_out[o]++] = {static_cast<std::int32_t>(k), i};
      in_entries[fill_in[i]++] = {static_cast<std::int32_t>(k), o};
    }
}

void sparse_conv_forward(const GatherPlan& plan, int cin, int cout, const double* x,
                         const double* w, const double* bias, double* out) {
  const std::int64_t wk = static_cast<std::int64_t>(cin) * cout;
#pragma omp parallel for schedule(dynamic, 64)
  for (int o = 0; o < plan.num_out; ++o) {
    double* y = out + static_cast<std::int64_t>(o) * cout;
    for (int c = 0; c < cout; ++c) y[c] = bias ? bias[c] : 0.0;
    for (std::int64_t e = plan.out_ptr[o]; e < plan.out_ptr[o + 1]; ++e) {
      const auto [k, i] = plan.out_entries[e];
      const double* xi = x + static_cast<std::int64_t>(i) * cin;
      const double* wkp = w + k * wk;
      for (int a = 0; a < cin; ++a) {
        const double xv = xi[a];
        const double* wr = wkp + static_cast<std::int64_t>(a) * cout;
        for (int c = 0; c < cout; ++c) y[c] += xv * wr[c];
      }
    }
  }
}

void sparse_conv_forward_reference(const GatherPlan& plan, int cin, int cout, const double* x,
                                   const double* w, const double* bias, double* out) {
  for (int o = 0; o < plan.num_out; ++o)
    for (int c = 0; c < cout; ++c) out[static_cast<std::int64_t>(o) * cout + c] = bias ? bias[c] : 0.0;
  for (std::size_t k = 0; k < plan.pairs.size(); ++k)
    for (auto [i, o] : plan.pairs[k])
      for (int a = 0; a < cin; ++a)
        for (int c = 0; c < cout; ++c)
          out[static_cast<std::int64_t>(o) * cout + c] +=
              x[static_cast<std::int64_t>(i) * cin + a] * w[(k * cin + a) * cout + c];
}

void sparse_conv_backward(const GatherPlan& plan, int cin, int cout, const double* x,
                          const double* w, const double* gy, double* gx, double* gw,
                          double* gbias) {
  const std::int64_t wk = static_cast<std::int64_t>(cin) * cout;
  if (gbias) {
    for (int o = 0; o < plan.num_out; ++o)
      for (int c = 0; c < cout; ++c) gbias[c] += gy[static_cast<std::int64_t>(o) * cout + c];
  }
  if (gx) {
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < plan.num_in; ++i) {
      double* g = gx + static_cast<std::int64_t>(i) * cin;
      for (std::int64_t e = plan.in_ptr[i]; e < plan.in_ptr[i + 1]; ++e) {
        const auto [k, o] = plan.in_entries[e];
        const double* go = gy + static_cast<std::int64_t>(o) * cout;
        const double* wkp = w + k * wk;
        for (int a = 0; a < cin; ++a) {
          const double* wr = wkp + static_cast<std::int64_t>(a) * cout;
          double s = 0;
          for (int c = 0; c < cout; ++c) s += wr[c] * go[c];
          g[a] += s;
        }
      }
    }
  }
  if (gw) {
    const auto offsets = static_cast<std::ptrdiff_t>(plan.pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < offsets; ++k) {
      double* gwk = gw + k * wk;
      for (auto [i, o] : plan.pairs[k]) {
        const double* xi = x + static_cast<std::int64_t>(i) * cin;
        const double* go = gy + static_cast<std::int64_t>(o) * cout;
        for (int a = 0; a < cin; ++a) {
          const double xv = xi[a];
          double* row = gwk + static_cast<std::int64_t>(a) * cout;
          for (int c = 0; c < cout; ++c) row[c] += xv * go[c];
        }
      }
    }
  }
}

void sparse_conv_backward_reference(const GatherPlan& plan, int cin, int cout, const double* x,
                                    const double* w, const double* gy, double* gx, double* gw,
                                    double* gbias) {
  for (std::size_t k = 0; k < plan.pairs.size(); ++k)
    for (auto [i, o] : plan.pairs[k])
      for (int a = 0; a < cin; ++a)
        for (int c = 0; c < cout; ++c) {
          const double g = gy[static_cast<std::int64_t>(o) * cout + c];
          if (gx) gx[static_cast<std::int64_t>(i) * cin + a] += g * w[(k * cin + a) * cout + c];
          if (gw) gw[(k * cin + a) * cout + c] += g * x[static_cast<std::int64_t>(i) * cin + a];
        }
  if (gbias)
    for (int o = 0; o < plan.num_out; ++o)
      for (int c = 0; c < cout; ++c) gbias[c] += gy[static_cast<std::int64_t>(o) * cout + c];
}

}  // namespace voxdet::kernels
