// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fvsrn/camera.hpp"
#include "fvsrn/common.hpp"
#include "fvsrn/metrics.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/neural.hpp"
#include "fvsrn/renderer.hpp"
#include "fvsrn/transfer_function.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

/// Supervision field: density(p, t) in [0,1], colored through `tf` for color heads.
struct TargetField {
  std::function<float(Vec3, float)> density;
  const TransferFunction* tf = nullptr;

  static TargetField of(const ScalarVolume& vol, const TransferFunction* tf = nullptr) {
    return {[&vol](Vec3 p, float) { return sample_volume(vol, p); }, tf};
  }
};

/// Target channels for a head: density, or (rgb, sigma / max_sigma) so that
/// absorption is on the same scale as color in the L1 loss.
inline int target_channels(Head h) { return h == Head::Density ? 1 : 4; }

inline float sigma_scale(const TargetField& f) {
  if (!f.tf) return 1.f;
  const float m = f.tf->max_sigma();
  return m > 0.f ? 1.f / m : 1.f;
}

inline void target_value(const TargetField& f, Head head, Vec3 p, float t, float* out) {
  const float d = f.density(p, t);
  if (head == Head::Density) {
    out[0] = d;
    return;
  }
  if (!f.tf) throw ConfigError("color-head training needs a transfer function");
  const auto s = (*f.tf)(d);
  out[0] = s.rgb.x;
  out[1] = s.rgb.y;
  out[2] = s.rgb.z;
  out[3] = s.sigma * sigma_scale(f);
}

/// Training pairs; rows of `values` follow target_channels().
struct WorldDataset {
  std::vector<ModelQuery> queries;
  Matrix<float> values;
  std::size_t size() const { return queries.size(); }
};

/// Per-voxel mean absolute prediction error on an r^3 cell grid over [0,1]^3.
struct ErrorGrid {
  int resolution = 0;
  std::vector<double> error;

  double total() const { return std::accumulate(error.begin(), error.end(), 0.0); }
};

enum class Sampler { Uniform, Importance };

/// Draws `count` positions (uniformly, or voxel-wise proportional to `grid`
/// then uniformly inside the voxel) and evaluates the target there. `times`,
/// when non-empty, supplies the timestep pool sampled uniformly per position.
inline WorldDataset sample_world_dataset(const TargetField& target, Head head, std::size_t count, Sampler sampler,
                                         std::uint64_t seed, const ErrorGrid* grid = nullptr,
                                         std::span<const int> times = {}) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  WorldDataset ds;
  ds.queries.resize(count);
  const bool importance = sampler == Sampler::Importance && grid && grid->total() > 0.0;
  if (sampler == Sampler::Importance && !grid) throw ConfigError("importance sampling requires an error grid");
  if (importance) {
    const int r = grid->resolution;
    std::discrete_distribution<std::size_t> pick(grid->error.begin(), grid->error.end());
    for (auto& q : ds.queries) {
      const std::size_t v = pick(rng);
      const int x = static_cast<int>(v % r), y = static_cast<int>(v / r % r), z = static_cast<int>(v / r / r);
      q.p = {(x + u(rng)) / r, (y + u(rng)) / r, (z + u(rng)) / r};
    }
  } else {
    for (auto& q : ds.queries) q.p = {u(rng), u(rng), u(rng)};
  }
  if (!times.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, times.size() - 1);
    for (auto& q : ds.queries) q.t = static_cast<float>(times[pick(rng)]);
  }
  const int C = target_channels(head);
  ds.values.resize(count, static_cast<std::size_t>(C));
  for (std::size_t n = 0; n < count; ++n) target_value(target, head, ds.queries[n].p, ds.queries[n].t, ds.values.row(n));
  return ds;
}

namespace detail {

/// Mean L1 over channels per sample, with the absorption channel rescaled.
inline void per_sample_l1(const FvsrnModel& model, const TargetField& target, std::span<const ModelQuery> qs,
                          const Matrix<float>& ref, std::vector<double>& out) {
  ModelWorkspace ws;
  const Head head = model.config.head;
  const int C = target_channels(head);
  const float ss = sigma_scale(target);
  out.resize(qs.size());
  constexpr std::size_t kChunk = 8192;
  for (std::size_t b = 0; b < qs.size(); b += kChunk) {
    const std::size_t e = std::min(qs.size(), b + kChunk);
    const auto& Y = model_forward_raw(model, qs.subspan(b, e - b), ws);
    for (std::size_t n = b; n < e; ++n) {
      float o[4] = {Y(n - b, 0), 0, 0, 0};
      if (head == Head::Color) o[1] = Y(n - b, 1), o[2] = Y(n - b, 2), o[3] = Y(n - b, 3);
      head_apply(head, o);
      if (head == Head::Color) o[3] *= ss;
      double acc = 0.0;
      for (int c = 0; c < C; ++c) acc += std::abs(static_cast<double>(o[c]) - ref(n, c));
      out[n] = acc / C;
    }
  }
}

}  // namespace detail

inline ErrorGrid build_error_grid(const FvsrnModel& model, const TargetField& target, int resolution,
                                  int samples_per_voxel = 8, std::uint64_t seed = 0, float t = 0.f) {
  if (resolution < 1 || samples_per_voxel < 1) throw ConfigError("error grid resolution and samples must be positive");
  const std::size_t voxels = static_cast<std::size_t>(resolution) * resolution * resolution;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  std::vector<ModelQuery> qs(voxels * samples_per_voxel);
  for (std::size_t v = 0; v < voxels; ++v) {
    const int x = static_cast<int>(v % resolution), y = static_cast<int>(v / resolution % resolution),
              z = static_cast<int>(v / resolution / resolution);
    for (int k = 0; k < samples_per_voxel; ++k)
      qs[v * samples_per_voxel + k] = {{(x + u(rng)) / resolution, (y + u(rng)) / resolution, (z + u(rng)) / resolution},
                                       {0, 0, 1},
                                       t};
  }
  const Head head = model.config.head;
  Matrix<float> ref(qs.size(), static_cast<std::size_t>(target_channels(head)));
  for (std::size_t n = 0; n < qs.size(); ++n) target_value(target, head, qs[n].p, qs[n].t, ref.row(n));
  std::vector<double> err;
  detail::per_sample_l1(model, target, qs, ref, err);
  ErrorGrid g{resolution, std::vector<double>(voxels, 0.0)};
  for (std::size_t v = 0; v < voxels; ++v) {
    double acc = 0.0;
    for (int k = 0; k < samples_per_voxel; ++k) acc += err[v * samples_per_voxel + k];
    g.error[v] = acc / samples_per_voxel;
  }
  return g;
}

/// Mean L1 of the model against the target on a fixed uniform probe set.
inline double evaluate_l1(const FvsrnModel& model, const TargetField& target, std::size_t count = 65536,
                          std::uint64_t seed = 0xE7A1, std::span<const int> times = {}) {
  const auto ds = sample_world_dataset(target, model.config.head, count, Sampler::Uniform, seed, nullptr, times);
  std::vector<double> err;
  detail::per_sample_l1(model, target, ds.queries, ds.values, err);
  return std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
}

// ---------------------------------------------------------------------------
// World-space training
// ---------------------------------------------------------------------------

struct WorldTrainConfig {
  std::size_t samples = 64 * 64 * 64;
  std::size_t batch = 4096;
  int epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  int resample_interval = 50;
  int error_grid_resolution = 32;
  int samples_per_error_voxel = 8;
  bool adaptive = false;

  void validate() const {
    if (samples < 1 || batch < 1 || epochs < 0 || resample_interval < 1 || error_grid_resolution < 1 ||
        samples_per_error_voxel < 1)
      throw ConfigError("world training counts must be positive");
    if (batch > samples) throw ConfigError("batch size must not exceed the sample count");
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  }
};

inline nlohmann::json world_config_to_json(const WorldTrainConfig& c) {
  return {{"samples", c.samples},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"seed", c.seed},
          {"resample_interval", c.resample_interval},
          {"error_grid_resolution", c.error_grid_resolution},
          {"samples_per_error_voxel", c.samples_per_error_voxel},
          {"adaptive", c.adaptive}};
}

inline WorldTrainConfig world_config_from_json(const nlohmann::json& j, WorldTrainConfig c = {}) {
  try {
    if (j.contains("samples")) c.samples = j.at("samples").get<std::size_t>();
    if (j.contains("batch")) c.batch = j.at("batch").get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("resample_interval")) c.resample_interval = j.at("resample_interval").get<int>();
    if (j.contains("error_grid_resolution")) c.error_grid_resolution = j.at("error_grid_resolution").get<int>();
    if (j.contains("samples_per_error_voxel")) c.samples_per_error_voxel = j.at("samples_per_error_voxel").get<int>();
    if (j.contains("adaptive")) c.adaptive = j.at("adaptive").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Called after every epoch with (epoch, mean loss).
using ProgressFn = std::function<void(int, double)>;

struct TrainResult {
  std::vector<double> loss;  ///< mean training L1 per epoch
  std::size_t resamples = 0;
};

namespace detail {

/// One epoch of shuffled mini-batch Adam on an L1 loss.
inline double train_epoch(FvsrnModel& model, const WorldDataset& ds, float sigma_scale_value, std::size_t batch,
                          double lr, AdamState<float>& adam, std::mt19937_64& rng, ModelWorkspace& ws,
                          GradientBuffer<float>& grads, std::vector<ModelQuery>& bq, Matrix<float>& d_raw) {
  const Head head = model.config.head;
  const int C = target_channels(head);
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  auto params = model_parameter_views(model);
  for (std::size_t b = 0; b < perm.size(); b += batch) {
    const std::size_t e = std::min(perm.size(), b + batch);
    const std::size_t n = e - b;
    bq.resize(n);
    for (std::size_t k = 0; k < n; ++k) bq[k] = ds.queries[perm[b + k]];
    const auto& Y = model_forward_raw(model, bq, ws);
    d_raw.resize(n, static_cast<std::size_t>(C));
    const float inv = 1.f / static_cast<float>(n * C);
    double loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const float* raw = Y.row(k);
      const float* ref = ds.values.row(perm[b + k]);
      float o[4] = {raw[0], 0, 0, 0};
      if (head == Head::Color) o[1] = raw[1], o[2] = raw[2], o[3] = raw[3];
      head_apply(head, o);
      float d_o[4] = {0, 0, 0, 0};
      for (int c = 0; c < C; ++c) {
        const float scale = (head == Head::Color && c == 3) ? sigma_scale_value : 1.f;
        const float diff = o[c] * scale - ref[c];
        loss += std::abs(diff);
        d_o[c] = (diff > 0.f ? inv : diff < 0.f ? -inv : 0.f) * scale;
      }
      head_backward(head, raw, d_o, d_raw.row(k));
    }
    loss /= static_cast<double>(n * C);
    if (!std::isfinite(loss)) throw NumericError("training loss became non-finite");
    grads.zero();
    model_backward_raw(model, ws, d_raw, grads);
    adam_step(params, gradient_views(grads), adam, lr);
    loss_sum += loss;
    ++batches;
  }
  return loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
}

inline void check_head(const FvsrnModel& model, const TargetField& target) {
  if (model.config.head == Head::Color && !target.tf) throw ConfigError("color-head training needs a transfer function");
  if (model.config.direction != DirectionEncoding::Pos)
    throw ConfigError("world-space training does not supply view directions; use the pos encoding");
}

inline double checked_epoch(int epoch, const std::function<double()>& fn) {
  try {
    const double l = fn();
    if (!std::isfinite(l)) throw NumericError("training loss became non-finite", epoch);
    return l;
  } catch (const NumericError& e) {
    if (e.epoch >= 0) throw;
    throw NumericError(e.what(), epoch);
  }
}

}  // namespace detail

/// World-space training on (position, value) pairs. With `adaptive`, the
/// dataset is regenerated every resample_interval epochs by importance
/// sampling an error grid of the current model (same sample count).
inline TrainResult train_world(FvsrnModel& model, const TargetField& target, const WorldTrainConfig& cfg,
                               const ProgressFn& progress = {}) {
  cfg.validate();
  model.validate();
  detail::check_head(model, target);
  if (model.config.temporal()) throw ConfigError("use train_temporal for temporal models");
  std::mt19937_64 rng(cfg.seed);
  WorldDataset ds = sample_world_dataset(target, model.config.head, cfg.samples, Sampler::Uniform, cfg.seed + 1);
  AdamState<float> adam;
  ModelWorkspace ws;
  auto grads = make_gradients(model);
  std::vector<ModelQuery> bq;
  Matrix<float> d_raw;
  const float ss = sigma_scale(target);
  TrainResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.adaptive && epoch > 0 && epoch % cfg.resample_interval == 0) {
      const auto grid = build_error_grid(model, target, cfg.error_grid_resolution, cfg.samples_per_error_voxel,
                                         cfg.seed + 100 + epoch);
      ds = sample_world_dataset(target, model.config.head, cfg.samples, Sampler::Importance, cfg.seed + 200 + epoch,
                                &grid);
      ++res.resamples;
    }
    const double l = detail::checked_epoch(
        epoch, [&] { return detail::train_epoch(model, ds, ss, cfg.batch, cfg.lr, adam, rng, ws, grads, bq, d_raw); });
    res.loss.push_back(l);
    if (progress) progress(epoch, l);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Temporal training
// ---------------------------------------------------------------------------

struct TemporalTrainConfig {
  std::vector<int> train_steps;  ///< timesteps seen in training
  WorldTrainConfig world;

  void validate(const FvsrnModel& model) const {
    world.validate();
    if (train_steps.empty()) throw ConfigError("temporal training needs at least one training timestep");
    if (!model.config.temporal()) throw ConfigError("train_temporal requires a temporal model");
    const auto& keys = model.config.keyframes;
    const auto [lo, hi] = model.config.resolved_time_range();
    for (int t : train_steps) {
      if (keys.size() > 1 && (t < keys.front() || t > keys.back()))
        throw ConfigError("training timestep " + std::to_string(t) + " lies outside the keyframe span");
      if (t < lo || t > hi) throw ConfigError("training timestep " + std::to_string(t) + " lies outside the time range");
    }
  }
};

/// Joint training of all keyframe grids and the network on (p, t, value)
/// triples with t drawn uniformly from train_steps.
inline TrainResult train_temporal(FvsrnModel& model, const TargetField& target, const TemporalTrainConfig& cfg,
                                  const ProgressFn& progress = {}) {
  cfg.validate(model);
  model.validate();
  detail::check_head(model, target);
  const auto& w = cfg.world;
  std::mt19937_64 rng(w.seed);
  WorldDataset ds =
      sample_world_dataset(target, model.config.head, w.samples, Sampler::Uniform, w.seed + 1, nullptr, cfg.train_steps);
  AdamState<float> adam;
  ModelWorkspace ws;
  auto grads = make_gradients(model);
  std::vector<ModelQuery> bq;
  Matrix<float> d_raw;
  const float ss = sigma_scale(target);
  TrainResult res;
  for (int epoch = 0; epoch < w.epochs; ++epoch) {
    const double l = detail::checked_epoch(
        epoch, [&] { return detail::train_epoch(model, ds, ss, w.batch, w.lr, adam, rng, ws, grads, bq, d_raw); });
    res.loss.push_back(l);
    if (progress) progress(epoch, l);
  }
  return res;
}

/// Baseline for in-between timesteps: the reference volumes at the two
/// bracketing keyframes, linearly interpolated in time.
inline ScalarVolume keyframe_lerp_volume(const std::function<ScalarVolume(int)>& sequence, const std::vector<int>& keys,
                                         float t) {
  const auto b = keyframe_bracket(keys, t);
  ScalarVolume lo = sequence(keys[b.lo]);
  if (b.hi == b.lo || b.w == 0.0) return lo;
  const ScalarVolume hi = sequence(keys[b.hi]);
  for (std::size_t i = 0; i < lo.data.size(); ++i)
    lo.data[i] = static_cast<float>((1.0 - b.w) * lo.data[i] + b.w * hi.data[i]);
  return lo;
}

// ---------------------------------------------------------------------------
// Screen-space training
// ---------------------------------------------------------------------------

struct ScreenTrainConfig {
  int views = 96;
  int resolution = 256;
  float stepsize = 0.02f;
  float reference_stepsize_voxels = 0.1f;
  float camera_distance = 2.f;
  float fov_y = 0.7853981634f;
  int epochs = 10;
  double lr = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (views < 1) throw ConfigError("screen training needs at least one view");
    if (resolution < 1) throw ConfigError("screen training resolution must be positive");
    if (!(stepsize > 0.f) || !(reference_stepsize_voxels > 0.f)) throw ConfigError("stepsize must be positive");
    if (epochs < 0) throw ConfigError("epoch count must be non-negative");
  }
};

inline nlohmann::json screen_config_to_json(const ScreenTrainConfig& c) {
  return {{"views", c.views},       {"resolution", c.resolution},
          {"stepsize", c.stepsize}, {"reference_stepsize_voxels", c.reference_stepsize_voxels},
          {"epochs", c.epochs},     {"lr", c.lr},
          {"seed", c.seed}};
}

inline ScreenTrainConfig screen_config_from_json(const nlohmann::json& j, ScreenTrainConfig c = {}) {
  try {
    if (j.contains("views")) c.views = j.at("views").get<int>();
    if (j.contains("resolution")) c.resolution = j.at("resolution").get<int>();
    if (j.contains("stepsize")) c.stepsize = j.at("stepsize").get<float>();
    if (j.contains("reference_stepsize_voxels")) c.reference_stepsize_voxels = j.at("reference_stepsize_voxels").get<float>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid screen training config: ") + e.what());
  }
  c.validate();
  return c;
}

/// L1 loss over the 4 image channels (premultiplied rgb on black, opacity)
/// and its per-pixel adjoint.
inline double image_l1(const Image& pred, const Image& ref, std::vector<float>* adjoint = nullptr) {
  if (pred.width != ref.width || pred.height != ref.height) throw ShapeError("image_l1: shapes differ");
  const std::size_t n = pred.data.size();
  const float inv = 1.f / static_cast<float>(n);
  if (adjoint) adjoint->resize(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float d = pred.data[i] - ref.data[i];
    loss += std::abs(d);
    if (adjoint) (*adjoint)[i] = d > 0.f ? inv : d < 0.f ? -inv : 0.f;
  }
  return loss / static_cast<double>(n);
}

/// Reference images pre-rendered from the volume; each epoch visits every view
/// in a seeded order with one Adam step per view.
inline TrainResult train_screen(FvsrnModel& model, const ScalarVolume& volume, const TransferFunction& tf,
                                const ScreenTrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  model.validate();
  if (model.config.head != Head::Color) throw ConfigError("screen-space training requires a color-head model");
  if (model.config.temporal()) throw ConfigError("screen-space training supports static models only");
  const auto cams = orbit_cameras(cfg.views, cfg.resolution, cfg.resolution, cfg.camera_distance, cfg.fov_y);
  RenderSettings ref_settings;
  ref_settings.stepsize = stepsize_from_voxels(cfg.reference_stepsize_voxels, volume.max_dim());
  ref_settings.termination = 1.f;
  RenderSettings s;
  s.stepsize = cfg.stepsize;
  s.termination = 1.f;
  std::vector<std::vector<Ray>> rays;
  std::vector<Image> refs;
  for (const auto& c : cams) {
    rays.push_back(camera_rays(c));
    refs.push_back(raymarch_forward(VolumeSource{volume, tf}, rays.back(), c.width, c.height, ref_settings));
  }
  std::mt19937_64 rng(cfg.seed);
  AdamState<float> adam;
  TrainResult res;
  std::vector<RayState> terminal;
  std::vector<float> adjoint;
  std::vector<std::size_t> order(cams.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double l = detail::checked_epoch(epoch, [&] {
      double sum = 0.0;
      for (std::size_t v : order) {
        const Image pred = raymarch_forward(ModelSource{model, nullptr, std::nullopt, false}, rays[v], cams[v].width,
                                            cams[v].height, s, &terminal);
        sum += image_l1(pred, refs[v], &adjoint);
        const auto grads = raymarch_backward(model, rays[v], s, adjoint, terminal);
        auto params = model_parameter_views(model);
        adam_step(params, gradient_views(grads), adam, cfg.lr);
      }
      return sum / static_cast<double>(order.size());
    });
    res.loss.push_back(l);
    if (progress) progress(epoch, l);
  }
  return res;
}

// ---------------------------------------------------------------------------
// View-based evaluation
// ---------------------------------------------------------------------------

struct ViewScore {
  double psnr = 0.0;
  double ssim = 0.0;
};

struct ViewMetrics {
  std::vector<ViewScore> views;
  ViewScore mean;
};

struct EvalSettings {
  int views = 64;
  int resolution = 512;
  float stepsize = 0.f;  ///< 0 selects one voxel of the reference volume
  float distance = 2.f;
  float fov_y = 0.7853981634f;
  int workers = 0;
};

namespace detail {

inline ViewMetrics evaluate_views_with(const ScalarVolume& reference, const TransferFunction& tf,
                                       const EvalSettings& e, const std::function<Image(const Camera&, const RenderSettings&)>& render) {
  if (e.views < 1 || e.resolution < 1) throw ConfigError("evaluation needs at least one view and pixel");
  RenderSettings s;
  s.stepsize = e.stepsize > 0.f ? e.stepsize : stepsize_from_voxels(1.f, reference.max_dim());
  s.workers = e.workers;
  ViewMetrics m;
  for (const auto& cam : orbit_cameras(e.views, e.resolution, e.resolution, e.distance, e.fov_y)) {
    const Image ref = render_image(reference, tf, cam, s);
    const Image img = render(cam, s);
    m.views.push_back({metric_psnr(img, ref), metric_ssim(img, ref)});
  }
  for (const auto& v : m.views) {
    m.mean.psnr += v.psnr / static_cast<double>(m.views.size());
    m.mean.ssim += v.ssim / static_cast<double>(m.views.size());
  }
  return m;
}

}  // namespace detail

/// Ground-truth renders vs model renders over a Fibonacci-sphere orbit.
/// Density models use `tf`; color models are rendered as they are.
inline ViewMetrics evaluate_views(const FvsrnModel& model, const ScalarVolume& reference, const TransferFunction& tf,
                                  const EvalSettings& e = {}, std::optional<float> t = std::nullopt) {
  const TransferFunction* mtf = model.config.head == Head::Density ? &tf : nullptr;
  return detail::evaluate_views_with(reference, tf, e, [&](const Camera& c, const RenderSettings& s) {
    return render_image(model, c, s, mtf, t);
  });
}

/// The same protocol for an approximating volume (e.g. a low-pass baseline).
inline ViewMetrics evaluate_views(const ScalarVolume& approx, const ScalarVolume& reference, const TransferFunction& tf,
                                  const EvalSettings& e = {}) {
  return detail::evaluate_views_with(reference, tf, e, [&](const Camera& c, const RenderSettings& s) {
    return render_image(approx, tf, c, s);
  });
}

inline void write_metrics_csv(std::ostream& os, const ViewMetrics& m) {
  os << "view,psnr,ssim\n";
  for (std::size_t i = 0; i < m.views.size(); ++i) os << i << ',' << m.views[i].psnr << ',' << m.views[i].ssim << '\n';
  os << "mean," << m.mean.psnr << ',' << m.mean.ssim << '\n';
}

inline void write_loss_csv(std::ostream& os, const TrainResult& r) {
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss.size(); ++i) os << i << ',' << r.loss[i] << '\n';
}

}  // namespace fvsrn
