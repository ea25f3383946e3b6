// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "fvsrn/camera.hpp"
#include "fvsrn/common.hpp"
#include "fvsrn/fused.hpp"
#include "fvsrn/image.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/transfer_function.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

/// Front-to-back compositing state: premultiplied color and opacity.
/// Kept in double so the reverse walk recovers states accurately.
struct RayState {
  std::array<double, 3> C{0.0, 0.0, 0.0};
  double A = 0.0;
};

struct RenderSettings {
  float stepsize = 0.01f;  ///< world units inside the unit cube
  int max_steps = 8192;
  Vec3 background{0.f, 0.f, 0.f};
  float termination = 0.999f;  ///< forward early-out opacity; ignored when terminal states are requested
  double eps_blend = 1e-5;
  int workers = 0;  ///< 0 selects default_thread_count()

  void validate() const {
    if (!(stepsize > 0.f) || !std::isfinite(stepsize)) throw ConfigError("render stepsize must be positive");
    if (max_steps < 1) throw ConfigError("render max_steps must be positive");
    if (!(termination >= 0.f && termination <= 1.f)) throw ConfigError("termination threshold must lie in [0,1]");
    if (!(eps_blend > 0.0 && eps_blend < 1.0)) throw ConfigError("eps_blend must lie in (0,1)");
    if (!isfinite(background)) throw ConfigError("background must be finite");
  }
  int resolved_workers() const { return workers > 0 ? workers : default_thread_count(); }
};

/// Stepsize in world units for a stepsize given in voxels of a volume with `resolution` voxels per axis.
inline float stepsize_from_voxels(float voxels, int resolution) {
  if (resolution < 1) throw ConfigError("volume resolution must be positive");
  return voxels / static_cast<float>(resolution);
}

inline double blend_alpha(double sigma, double ds, double eps_blend = 1e-5) {
  return std::min(1.0 - eps_blend, 1.0 - std::exp(-sigma * ds));
}

inline RayState composite_step(const RayState& s, Vec3 c, double sigma, double ds, double eps_blend = 1e-5) {
  const double a = blend_alpha(sigma, ds, eps_blend);
  const double w = (1.0 - s.A) * a;
  RayState o;
  for (int k = 0; k < 3; ++k) o.C[k] = s.C[k] + w * c[k];
  o.A = s.A + w;
  return o;
}

/// Recovers the state before composite_step from the state after it.
inline RayState composite_invert(const RayState& s, Vec3 c, double sigma, double ds, double eps_blend = 1e-5) {
  const double a = blend_alpha(sigma, ds, eps_blend);
  if (!(1.0 - a > 0.0)) throw NumericError("composite_invert: alpha too close to 1 to invert");
  RayState o;
  o.A = (s.A - a) / (1.0 - a);
  const double w = (1.0 - o.A) * a;
  for (int k = 0; k < 3; ++k) o.C[k] = s.C[k] - w * c[k];
  return o;
}

/// Uniform stepping along the ray's chord through [0,1]^3: `steps` samples at
/// the midpoints of equal sub-intervals of length ds.
struct RaySegment {
  double t0 = 0.0;
  double ds = 0.0;
  int steps = 0;  ///< 0 when the ray misses the box

  Vec3 sample(const Ray& r, int i) const {
    const float t = static_cast<float>(t0 + (i + 0.5) * ds);
    return clamp01(r.origin + r.direction * t);
  }
};

inline RaySegment ray_segment(const Ray& r, const RenderSettings& s) {
  if (!isfinite(r.origin) || !isfinite(r.direction) || length(r.direction) < 1e-12f) return {};
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = r.origin[a], d = r.direction[a];
    if (std::abs(d) < 1e-12) {
      if (o < 0.0 || o > 1.0) return {};
      continue;
    }
    double t1 = (0.0 - o) / d, t2 = (1.0 - o) / d;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (!(tmax > tmin)) return {};
  const double L = tmax - tmin;
  const int n = static_cast<int>(std::clamp<double>(std::round(L / s.stepsize), 1.0, s.max_steps));
  return {tmin, L / n, n};
}

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

/// Ground truth: trilinear density through a transfer function.
struct VolumeSource {
  const ScalarVolume& volume;
  const TransferFunction& tf;

  void shade(std::span<const ModelQuery> q, ColorSample* out) const {
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto s = tf(sample_volume(volume, q[i].p));
      out[i] = {s.rgb, s.sigma};
    }
  }
};

/// A trained model; density heads go through `tf` (ramp when null), color heads
/// are used directly. `fused` selects the tile evaluator over the layer-by-layer path.
struct ModelSource {
  const FvsrnModel& model;
  const TransferFunction* tf = nullptr;
  std::optional<float> t;
  bool fused = true;

  void validate() const {
    const auto& c = model.config;
    if (c.head == Head::Color && tf) throw ConfigError("a transfer function cannot be applied to a color-head model");
    if (c.temporal() && !t) throw ConfigError("temporal model requires a timestep");
    if (!c.temporal() && t) throw ConfigError("timestep supplied to a non-temporal model");
    if (t) {
      const auto [lo, hi] = c.resolved_time_range();
      if (!(*t >= lo && *t <= hi)) throw ConfigError("timestep outside the model's time range");
    }
  }
};

namespace detail {

class ModelShader {
 public:
  explicit ModelShader(const ModelSource& src)
      : src_(src), tf_(src.tf ? *src.tf : TransferFunction()) {
    if (src.fused) evaluator_.emplace(src.model);
  }

  void shade(std::span<const ModelQuery> q, ColorSample* out) const {
    Matrix<float> Y;
    if (evaluator_) {
      Y = evaluator_->eval_queries(src_.model, q, 1);
    } else {
      ModelWorkspace ws;
      Y = model_forward_raw(src_.model, q, ws);
      for (std::size_t n = 0; n < Y.rows; ++n) head_apply(src_.model.config.head, Y.row(n));
    }
    if (src_.model.config.head == Head::Density) {
      for (std::size_t n = 0; n < q.size(); ++n) {
        const auto s = tf_(Y(n, 0));
        out[n] = {s.rgb, s.sigma};
      }
    } else {
      for (std::size_t n = 0; n < q.size(); ++n) out[n] = {{Y(n, 0), Y(n, 1), Y(n, 2)}, Y(n, 3)};
    }
  }

 private:
  const ModelSource& src_;
  TransferFunction tf_;
  std::optional<FusedEvaluator> evaluator_;
};

inline constexpr std::size_t kRayTile = 64;
inline constexpr int kStepChunk = 32;

/// Marches rays in tiles, evaluating the source for a chunk of steps of all
/// active rays at once.
template <class Shader>
Image march(std::span<const Ray> rays, int width, int height, const RenderSettings& s, const Shader& shader,
            float t, std::vector<RayState>* terminal) {
  s.validate();
  if (rays.size() != static_cast<std::size_t>(width) * height) throw ShapeError("ray count does not match image size");
  Image img(width, height);
  if (terminal) terminal->assign(rays.size(), RayState{});
  const bool early = !terminal && s.termination < 1.f;
  const std::size_t tiles = (rays.size() + kRayTile - 1) / kRayTile;
  parallel_ranges(tiles, s.resolved_workers(), [&](std::size_t t0, std::size_t t1, int) {
    std::vector<ModelQuery> qs;
    std::vector<ColorSample> cs;
    std::vector<std::pair<std::size_t, int>> owner;  // (ray, step)
    for (std::size_t tile = t0; tile < t1; ++tile) {
      const std::size_t r0 = tile * kRayTile, r1 = std::min(rays.size(), r0 + kRayTile);
      std::vector<RaySegment> seg(r1 - r0);
      std::vector<RayState> st(r1 - r0);
      std::vector<char> done(r1 - r0, 0);
      int max_steps = 0;
      for (std::size_t r = r0; r < r1; ++r) {
        seg[r - r0] = ray_segment(rays[r], s);
        max_steps = std::max(max_steps, seg[r - r0].steps);
      }
      for (int c0 = 0; c0 < max_steps; c0 += kStepChunk) {
        qs.clear();
        owner.clear();
        for (std::size_t r = r0; r < r1; ++r) {
          const auto& sg = seg[r - r0];
          if (done[r - r0]) continue;
          for (int i = c0; i < std::min(sg.steps, c0 + kStepChunk); ++i) {
            qs.push_back({sg.sample(rays[r], i), rays[r].direction, t});
            owner.emplace_back(r, i);
          }
        }
        if (qs.empty()) break;
        cs.resize(qs.size());
        shader.shade(qs, cs.data());
        for (std::size_t k = 0; k < qs.size(); ++k) {
          const std::size_t j = owner[k].first - r0;
          if (done[j]) continue;
          st[j] = composite_step(st[j], cs[k].rgb, cs[k].sigma, seg[j].ds, s.eps_blend);
          if (early && st[j].A >= s.termination) done[j] = 1;
        }
      }
      for (std::size_t r = r0; r < r1; ++r) {
        const RayState& x = st[r - r0];
        float* px = img.data.data() + r * Image::kChannels;
        for (int k = 0; k < 3; ++k) px[k] = static_cast<float>(x.C[k] + (1.0 - x.A) * s.background[k]);
        px[3] = static_cast<float>(x.A);
        if (terminal) (*terminal)[r] = x;
      }
    }
  });
  return img;
}

}  // namespace detail

inline Image raymarch_forward(const VolumeSource& src, std::span<const Ray> rays, int width, int height,
                              const RenderSettings& s, std::vector<RayState>* terminal = nullptr) {
  return detail::march(rays, width, height, s, src, 0.f, terminal);
}

inline Image raymarch_forward(const ModelSource& src, std::span<const Ray> rays, int width, int height,
                              const RenderSettings& s, std::vector<RayState>* terminal = nullptr) {
  src.validate();
  const detail::ModelShader shader(src);
  return detail::march(rays, width, height, s, shader, src.t.value_or(0.f), terminal);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

struct BackwardStats {
  std::size_t workspace_bytes = 0;  ///< peak bytes of per-worker buffers
  std::size_t samples = 0;          ///< model re-evaluations
};

namespace detail {

template <class T>
std::size_t capacity_bytes(const std::vector<T>& v) {
  return v.capacity() * sizeof(T);
}
inline std::size_t capacity_bytes(const Matrix<float>& m) { return m.data.capacity() * sizeof(float); }

inline std::size_t workspace_bytes(const ModelWorkspace& ws) {
  std::size_t b = capacity_bytes(ws.input) + capacity_bytes(ws.d_input) + capacity_bytes(ws.traces);
  for (const auto& m : ws.cache.inputs) b += capacity_bytes(m);
  for (const auto& m : ws.cache.pre) b += capacity_bytes(m);
  return b;
}

inline constexpr std::size_t kBackwardTile = 32;

}  // namespace detail

/// Reverse-mode pass for a color-head model. `adjoint` holds dLoss/dpixel
/// (rgb + opacity per ray, same layout as the forward image); `terminal` are
/// the forward states with early termination disabled. Each ray is walked
/// backwards, re-evaluating the model and recovering earlier states by
/// inverting the compositing step, so memory does not grow with step count.
inline GradientBuffer<float> raymarch_backward(const FvsrnModel& model, std::span<const Ray> rays,
                                               const RenderSettings& s, std::span<const float> adjoint,
                                               std::span<const RayState> terminal,
                                               std::optional<float> t = std::nullopt,
                                               BackwardStats* stats = nullptr) {
  s.validate();
  if (model.config.head != Head::Color) throw ConfigError("raymarch_backward requires a color-head model");
  ModelSource{model, nullptr, t, false}.validate();
  if (adjoint.size() != rays.size() * Image::kChannels) throw ShapeError("image adjoint size does not match rays");
  if (terminal.size() != rays.size()) throw ShapeError("terminal state count does not match rays");

  const int workers = s.resolved_workers();
  std::vector<GradientBuffer<float>> partial(static_cast<std::size_t>(workers), make_gradients(model));
  std::vector<BackwardStats> wstats(static_cast<std::size_t>(workers));
  const std::size_t tiles = (rays.size() + detail::kBackwardTile - 1) / detail::kBackwardTile;
  const float tv = t.value_or(0.f);

  parallel_ranges(tiles, workers, [&](std::size_t t0, std::size_t t1, int worker) {
    auto& grads = partial[static_cast<std::size_t>(worker)];
    auto& bs = wstats[static_cast<std::size_t>(worker)];
    ModelWorkspace ws;
    Matrix<float> d_raw;
    std::vector<ModelQuery> qs;
    std::vector<std::size_t> owner;
    std::vector<RaySegment> seg(detail::kBackwardTile);
    std::vector<RayState> st(detail::kBackwardTile);
    std::vector<std::array<double, 3>> gC(detail::kBackwardTile);
    std::vector<double> gA(detail::kBackwardTile);
    qs.reserve(detail::kBackwardTile);
    owner.reserve(detail::kBackwardTile);
    for (std::size_t tile = t0; tile < t1; ++tile) {
      const std::size_t r0 = tile * detail::kBackwardTile, r1 = std::min(rays.size(), r0 + detail::kBackwardTile);
      int max_steps = 0;
      for (std::size_t r = r0; r < r1; ++r) {
        const std::size_t j = r - r0;
        seg[j] = ray_segment(rays[r], s);
        st[j] = terminal[r];
        const float* g = adjoint.data() + r * Image::kChannels;
        double bg_dot = 0.0;
        for (int k = 0; k < 3; ++k) {
          gC[j][k] = g[k];
          bg_dot += static_cast<double>(g[k]) * s.background[k];
          if (!std::isfinite(g[k])) throw NumericError("raymarch_backward: non-finite image adjoint");
        }
        if (!std::isfinite(g[3])) throw NumericError("raymarch_backward: non-finite image adjoint");
        gA[j] = g[3] - bg_dot;
        max_steps = std::max(max_steps, seg[j].steps);
      }
      for (int i = max_steps - 1; i >= 0; --i) {
        qs.clear();
        owner.clear();
        for (std::size_t r = r0; r < r1; ++r)
          if (i < seg[r - r0].steps) {
            qs.push_back({seg[r - r0].sample(rays[r], i), rays[r].direction, tv});
            owner.push_back(r - r0);
          }
        const Matrix<float>& raw = model_forward_raw(model, qs, ws);
        d_raw.resize(qs.size(), 4);
        for (std::size_t k = 0; k < qs.size(); ++k) {
          const std::size_t j = owner[k];
          float out[4] = {raw(k, 0), raw(k, 1), raw(k, 2), raw(k, 3)};
          head_apply(Head::Color, out);
          const Vec3 c{out[0], out[1], out[2]};
          const double ds = seg[j].ds;
          const double a = blend_alpha(out[3], ds, s.eps_blend);
          const bool clamped = 1.0 - std::exp(-static_cast<double>(out[3]) * ds) > 1.0 - s.eps_blend;
          const RayState prev = composite_invert(st[j], c, out[3], ds, s.eps_blend);
          double gc_dot = 0.0;
          for (int q = 0; q < 3; ++q) gc_dot += gC[j][q] * c[q];
          const double one_minus_A = 1.0 - prev.A;
          const double g_alpha = one_minus_A * (gc_dot + gA[j]);
          float d_out[4];
          for (int q = 0; q < 3; ++q) d_out[q] = static_cast<float>(one_minus_A * a * gC[j][q]);
          d_out[3] = clamped ? 0.f : static_cast<float>(g_alpha * ds * (1.0 - a));
          head_backward(Head::Color, raw.row(k), d_out, d_raw.row(k));
          gA[j] = gA[j] * (1.0 - a) - a * gc_dot;
          st[j] = prev;
        }
        model_backward_raw(model, ws, d_raw, grads);
        bs.samples += qs.size();
        const std::size_t bytes = detail::workspace_bytes(ws) + detail::capacity_bytes(d_raw) +
                                  detail::capacity_bytes(qs) + detail::capacity_bytes(owner) +
                                  detail::capacity_bytes(seg) + detail::capacity_bytes(st) +
                                  detail::capacity_bytes(gC) + detail::capacity_bytes(gA);
        bs.workspace_bytes = std::max(bs.workspace_bytes, bytes);
      }
    }
  });

  GradientBuffer<float> total = std::move(partial[0]);
  for (std::size_t w = 1; w < partial.size(); ++w) total.add(partial[w]);
  if (!total.all_finite()) throw NumericError("raymarch_backward produced non-finite gradients");
  if (stats) {
    *stats = {};
    for (const auto& b : wstats) {
      stats->workspace_bytes = std::max(stats->workspace_bytes, b.workspace_bytes);
      stats->samples += b.samples;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convenience
// ---------------------------------------------------------------------------

inline Image render_image(const ScalarVolume& volume, const TransferFunction& tf, const Camera& cam,
                          const RenderSettings& s) {
  const auto rays = camera_rays(cam);
  return raymarch_forward(VolumeSource{volume, tf}, rays, cam.width, cam.height, s);
}

inline Image render_image(const FvsrnModel& model, const Camera& cam, const RenderSettings& s,
                          const TransferFunction* tf = nullptr, std::optional<float> t = std::nullopt) {
  const auto rays = camera_rays(cam);
  return raymarch_forward(ModelSource{model, tf, t}, rays, cam.width, cam.height, s);
}

}  // namespace fvsrn
