// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <random>
#include <span>
#include <vector>

#include "fvsrn/common.hpp"

namespace fvsrn {

/// Dense R^3 grid of F-channel latent vectors spanning [0,1]^3 with vertex
/// (i,j,k) at (i,j,k)/(R-1). Storage is vertex-major, channel fastest.
template <class T = float>
struct LatentGrid {
  int R = 0;
  int F = 0;
  std::vector<T> values;

  LatentGrid() = default;
  LatentGrid(int resolution, int features)
      : R(resolution), F(features),
        values(static_cast<std::size_t>(resolution) * resolution * resolution * features, T(0)) {
    if (resolution < 2) throw ConfigError("latent grid resolution must be >= 2");
    if (features < 1) throw ConfigError("latent grid needs at least one feature channel");
  }

  std::size_t vertex_count() const { return static_cast<std::size_t>(R) * R * R; }
  std::size_t vertex_offset(int x, int y, int z) const {
    return ((static_cast<std::size_t>(z) * R + y) * R + x) * static_cast<std::size_t>(F);
  }
  std::span<T> vertex(int x, int y, int z) { return {values.data() + vertex_offset(x, y, z), static_cast<std::size_t>(F)}; }
  std::span<const T> vertex(int x, int y, int z) const {
    return {values.data() + vertex_offset(x, y, z), static_cast<std::size_t>(F)};
  }
};

/// Values i.i.d. N(0, 0.1^2).
template <class T = float>
LatentGrid<T> grid_init(int R, int F, std::uint64_t seed, double stddev = 0.1) {
  LatentGrid<T> g(R, F);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& v : g.values) v = static_cast<T>(n(rng));
  return g;
}

/// Eight corner offsets (into `values`) and trilinear weights for one position.
template <class T>
struct TrilinearStencil {
  std::size_t offset[8];
  T weight[8];
};

template <class T>
TrilinearStencil<T> grid_stencil(int R, int F, Vec3 p) {
  int i0[3];
  T f[3];
  for (int a = 0; a < 3; ++a) {
    const T x = std::clamp(static_cast<T>(p[a]), T(0), T(1)) * static_cast<T>(R - 1);
    int i = static_cast<int>(std::floor(x));
    i = std::clamp(i, 0, R - 2);
    i0[a] = i;
    f[a] = x - static_cast<T>(i);
  }
  TrilinearStencil<T> s;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    s.offset[c] = ((static_cast<std::size_t>(i0[2] + dz) * R + (i0[1] + dy)) * R + (i0[0] + dx)) * static_cast<std::size_t>(F);
    s.weight[c] = (dx ? f[0] : T(1) - f[0]) * (dy ? f[1] : T(1) - f[1]) * (dz ? f[2] : T(1) - f[2]);
  }
  return s;
}

/// out[f] = sum_c w_c * values[corner_c][f]; `scale` multiplies every weight
/// and `accumulate` adds instead of overwriting.
template <class T>
void grid_gather(const LatentGrid<T>& g, const TrilinearStencil<T>& s, T* out, T scale = T(1), bool accumulate = false) {
  if (!accumulate)
    for (int f = 0; f < g.F; ++f) out[f] = T(0);
  for (int c = 0; c < 8; ++c) {
    const T w = s.weight[c] * scale;
    if (w == T(0)) continue;
    const T* v = g.values.data() + s.offset[c];
#pragma omp simd
    for (int f = 0; f < g.F; ++f) out[f] += w * v[f];
  }
}

/// grads[corner_c][f] += scale * w_c * zbar[f].
template <class T>
void grid_scatter(int F, const TrilinearStencil<T>& s, const T* zbar, T* grads, T scale = T(1)) {
  for (int c = 0; c < 8; ++c) {
    const T w = s.weight[c] * scale;
    if (w == T(0)) continue;
    T* g = grads + s.offset[c];
#pragma omp simd
    for (int f = 0; f < F; ++f) g[f] += w * zbar[f];
  }
}

template <class T>
std::vector<T> grid_sample(const LatentGrid<T>& g, Vec3 p) {
  std::vector<T> z(static_cast<std::size_t>(g.F));
  grid_gather(g, grid_stencil<T>(g.R, g.F, p), z.data());
  return z;
}

/// Adds the trilinear weight times zbar to each of the 8 corner gradient slots.
/// Positions receive no gradient.
template <class T>
void grid_sample_backward(const LatentGrid<T>& g, Vec3 p, std::span<const T> zbar, std::span<T> grads) {
  if (zbar.size() != static_cast<std::size_t>(g.F) || grads.size() != g.values.size())
    throw ShapeError("grid_sample_backward: shape mismatch");
  grid_scatter(g.F, grid_stencil<T>(g.R, g.F, p), zbar.data(), grads.data());
}

// ---------------------------------------------------------------------------
// 8-bit quantization
// ---------------------------------------------------------------------------

struct QuantizedLatentGrid {
  int R = 0;
  int F = 0;
  std::vector<std::uint8_t> codes;
  std::vector<float> channel_min;
  std::vector<float> channel_max;
};

/// Per channel: code = round((v - min) / (max - min) * 255), half away from zero.
/// A constant channel stores code 0 with min = max.
template <class T>
QuantizedLatentGrid grid_quantize(const LatentGrid<T>& g) {
  QuantizedLatentGrid q;
  q.R = g.R;
  q.F = g.F;
  q.channel_min.assign(static_cast<std::size_t>(g.F), std::numeric_limits<float>::infinity());
  q.channel_max.assign(static_cast<std::size_t>(g.F), -std::numeric_limits<float>::infinity());
  const std::size_t nv = g.vertex_count();
  for (std::size_t v = 0; v < nv; ++v)
    for (int f = 0; f < g.F; ++f) {
      const float x = static_cast<float>(g.values[v * g.F + f]);
      q.channel_min[f] = std::min(q.channel_min[f], x);
      q.channel_max[f] = std::max(q.channel_max[f], x);
    }
  q.codes.resize(g.values.size());
  for (std::size_t v = 0; v < nv; ++v)
    for (int f = 0; f < g.F; ++f) {
      const double lo = q.channel_min[f], hi = q.channel_max[f];
      const std::size_t i = v * g.F + f;
      if (hi <= lo) {
        q.codes[i] = 0;
        continue;
      }
      const double t = (static_cast<double>(g.values[i]) - lo) / (hi - lo) * 255.0;
      q.codes[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(t), 0, 255));
    }
  return q;
}

/// v = min + code / 255 * (max - min).
template <class T = float>
LatentGrid<T> grid_dequantize(const QuantizedLatentGrid& q) {
  LatentGrid<T> g(q.R, q.F);
  if (q.codes.size() != g.values.size() || q.channel_min.size() != static_cast<std::size_t>(q.F) ||
      q.channel_max.size() != static_cast<std::size_t>(q.F))
    throw ShapeError("grid_dequantize: inconsistent quantized grid");
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    const int f = static_cast<int>(i % static_cast<std::size_t>(q.F));
    const double lo = q.channel_min[f], hi = q.channel_max[f];
    g.values[i] = static_cast<T>(lo + q.codes[i] / 255.0 * (hi - lo));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Keyframes
// ---------------------------------------------------------------------------

/// Latent grids stored at sorted keyframe timesteps, all with the same (R, F).
template <class T = float>
struct KeyframeGrids {
  std::vector<int> keys;
  std::vector<LatentGrid<T>> grids;

  int R() const { return grids.empty() ? 0 : grids.front().R; }
  int F() const { return grids.empty() ? 0 : grids.front().F; }

  void validate() const {
    if (keys.empty() || keys.size() != grids.size()) throw ConfigError("keyframe grids: need one grid per keyframe (>= 1)");
    for (std::size_t i = 1; i < keys.size(); ++i)
      if (keys[i] <= keys[i - 1]) throw ConfigError("keyframe indices must be strictly increasing");
    for (const auto& g : grids)
      if (g.R != grids.front().R || g.F != grids.front().F) throw ConfigError("keyframe grids must share (R, F)");
  }
};

/// Bracketing keyframes for time t: z = (1-w) G[lo] + w G[hi]; t is clamped to the keyframe span.
struct KeyframeBracket {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double w = 0.0;
};

inline KeyframeBracket keyframe_bracket(const std::vector<int>& keys, double t) {
  if (keys.empty()) throw ConfigError("keyframe set is empty");
  if (!std::isfinite(t)) throw ConfigError("keyframe time must be finite");
  if (keys.size() == 1 || t <= keys.front()) return {0, 0, 0.0};
  if (t >= keys.back()) return {keys.size() - 1, keys.size() - 1, 0.0};
  const auto it = std::upper_bound(keys.begin(), keys.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - keys.begin());
  const std::size_t lo = hi - 1;
  return {lo, hi, (t - keys[lo]) / static_cast<double>(keys[hi] - keys[lo])};
}

template <class T>
std::vector<T> keyframe_sample(const KeyframeGrids<T>& kfg, Vec3 p, double t) {
  if (kfg.grids.empty()) throw ConfigError("keyframe set is empty");
  const auto b = keyframe_bracket(kfg.keys, t);
  const auto s = grid_stencil<T>(kfg.R(), kfg.F(), p);
  std::vector<T> z(static_cast<std::size_t>(kfg.F()), T(0));
  grid_gather(kfg.grids[b.lo], s, z.data(), static_cast<T>(1.0 - b.w), true);
  if (b.hi != b.lo && b.w != 0.0) grid_gather(kfg.grids[b.hi], s, z.data(), static_cast<T>(b.w), true);
  return z;
}

}  // namespace fvsrn
