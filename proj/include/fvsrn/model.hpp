// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fvsrn/common.hpp"
#include "fvsrn/latent_grid.hpp"
#include "fvsrn/neural.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

enum class Head { Density, Color };
enum class DirectionEncoding { Pos, DirP, DirF };
enum class TimeEncoding { None, Direct, Fourier, Both };

inline Head head_from_string(std::string_view s) {
  if (s == "density") return Head::Density;
  if (s == "color") return Head::Color;
  throw ConfigError("unknown head '" + std::string(s) + "'");
}
inline const char* to_string(Head h) { return h == Head::Density ? "density" : "color"; }

inline DirectionEncoding direction_from_string(std::string_view s) {
  if (s == "pos") return DirectionEncoding::Pos;
  if (s == "dirP" || s == "dirp") return DirectionEncoding::DirP;
  if (s == "dirF" || s == "dirf") return DirectionEncoding::DirF;
  throw ConfigError("unknown direction encoding '" + std::string(s) + "'");
}
inline const char* to_string(DirectionEncoding d) {
  switch (d) {
    case DirectionEncoding::Pos: return "pos";
    case DirectionEncoding::DirP: return "dirP";
    case DirectionEncoding::DirF: return "dirF";
  }
  return "?";
}

inline TimeEncoding time_encoding_from_string(std::string_view s) {
  if (s == "none") return TimeEncoding::None;
  if (s == "direct") return TimeEncoding::Direct;
  if (s == "fourier") return TimeEncoding::Fourier;
  if (s == "both") return TimeEncoding::Both;
  throw ConfigError("unknown time encoding '" + std::string(s) + "'");
}
inline const char* to_string(TimeEncoding t) {
  switch (t) {
    case TimeEncoding::None: return "none";
    case TimeEncoding::Direct: return "direct";
    case TimeEncoding::Fourier: return "fourier";
    case TimeEncoding::Both: return "both";
  }
  return "?";
}

/// Network input layout: position | direction | sin | cos | time features | latent.
struct ModelConfig {
  Head head = Head::Density;
  int layers = 4;
  int channels = 32;
  Activation activation = Activation::SnakeAlt;
  FourierMode fourier = FourierMode::Nerf;
  int fourier_features = -1;  ///< -1 selects (channels - 4) / 2
  double fourier_sigma = 1.0;
  int grid_resolution = 32;  ///< 0 disables the latent grid
  int grid_features = 16;
  DirectionEncoding direction = DirectionEncoding::Pos;
  TimeEncoding time = TimeEncoding::None;
  int time_frequencies = 4;
  std::vector<int> keyframes;  ///< non-empty for temporal models
  std::optional<std::pair<double, double>> time_range;  ///< defaults to the keyframe span
  std::uint64_t seed = 0;
  int volume_resolution = 0;  ///< voxels per axis of the training volume, 0 when unknown

  int fourier_count() const {
    if (fourier == FourierMode::Off) return 0;
    return fourier_features >= 0 ? fourier_features : std::max(0, (channels - 4) / 2);
  }
  bool has_grid() const { return grid_resolution > 0; }
  bool temporal() const { return !keyframes.empty() || time != TimeEncoding::None; }
  int output_width() const { return head == Head::Density ? 1 : 4; }
  int spatial_inputs() const { return direction == DirectionEncoding::Pos ? 3 : 6; }
  int time_feature_count() const {
    switch (time) {
      case TimeEncoding::None: return 0;
      case TimeEncoding::Direct: return 1;
      case TimeEncoding::Fourier: return 2 * time_frequencies;
      case TimeEncoding::Both: return 1 + 2 * time_frequencies;
    }
    return 0;
  }
  int latent_offset() const { return spatial_inputs() + 2 * fourier_count() + time_feature_count(); }
  int input_width() const { return latent_offset() + (has_grid() ? grid_features : 0); }
  std::pair<double, double> resolved_time_range() const {
    if (time_range) return *time_range;
    if (!keyframes.empty()) return {keyframes.front(), keyframes.back()};
    return {0.0, 1.0};
  }

  void validate() const {
    if (layers < 1) throw ConfigError("model needs at least one layer");
    if (channels < 1) throw ConfigError("model channel count must be positive");
    if (fourier_count() < 0) throw ConfigError("fourier feature count must be non-negative");
    if (has_grid() && (grid_resolution < 2 || grid_features < 1))
      throw ConfigError("latent grid needs R >= 2 and F >= 1");
    if (direction != DirectionEncoding::Pos && head != Head::Color)
      throw ConfigError("direction encodings require the color head");
    if (volume_resolution < 0) throw ConfigError("volume_resolution must be non-negative");
    if (time_frequencies < 0) throw ConfigError("time frequency count must be non-negative");
    for (std::size_t i = 1; i < keyframes.size(); ++i)
      if (keyframes[i] <= keyframes[i - 1]) throw ConfigError("keyframes must be strictly increasing");
    if (temporal()) {
      const auto [lo, hi] = resolved_time_range();
      if (!(hi >= lo)) throw ConfigError("time range must satisfy min <= max");
      if (keyframes.empty() && has_grid()) throw ConfigError("temporal models with a latent grid need keyframes");
    }
  }
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j{{"head", to_string(c.head)},
                   {"layers", c.layers},
                   {"channels", c.channels},
                   {"activation", to_string(c.activation)},
                   {"fourier", to_string(c.fourier)},
                   {"fourier_features", c.fourier_count()},
                   {"fourier_sigma", c.fourier_sigma},
                   {"grid_resolution", c.grid_resolution},
                   {"grid_features", c.grid_features},
                   {"direction", to_string(c.direction)},
                   {"time", to_string(c.time)},
                   {"time_frequencies", c.time_frequencies},
                   {"keyframes", c.keyframes},
                   {"seed", c.seed},
                   {"volume_resolution", c.volume_resolution}};
  if (c.time_range) j["time_range"] = {c.time_range->first, c.time_range->second};
  return j;
}

/// Missing keys keep the values of `c`.
inline ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  try {
    if (j.contains("head")) c.head = head_from_string(j.at("head").get<std::string>());
    if (j.contains("layers")) c.layers = j.at("layers").get<int>();
    if (j.contains("channels")) c.channels = j.at("channels").get<int>();
    if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
    if (j.contains("fourier")) c.fourier = fourier_mode_from_string(j.at("fourier").get<std::string>());
    if (j.contains("fourier_features")) c.fourier_features = j.at("fourier_features").get<int>();
    if (j.contains("fourier_sigma")) c.fourier_sigma = j.at("fourier_sigma").get<double>();
    if (j.contains("grid_resolution")) c.grid_resolution = j.at("grid_resolution").get<int>();
    if (j.contains("grid_features")) c.grid_features = j.at("grid_features").get<int>();
    if (j.contains("direction")) c.direction = direction_from_string(j.at("direction").get<std::string>());
    if (j.contains("time")) c.time = time_encoding_from_string(j.at("time").get<std::string>());
    if (j.contains("time_frequencies")) c.time_frequencies = j.at("time_frequencies").get<int>();
    if (j.contains("keyframes")) c.keyframes = j.at("keyframes").get<std::vector<int>>();
    if (j.contains("time_range")) {
      const auto r = j.at("time_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("time_range must be [min, max]");
      c.time_range = std::make_pair(r[0], r[1]);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("volume_resolution")) c.volume_resolution = j.at("volume_resolution").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

/// A query point: position in [0,1]^3, unit view direction (direction
/// encodings only) and timestep (temporal models only).
struct ModelQuery {
  Vec3 p;
  Vec3 d{0.f, 0.f, 1.f};
  float t = 0.f;
};

struct ColorSample {
  Vec3 rgb;
  float sigma = 0.f;
};

/// Fourier-encoded MLP with an optional (keyframed) latent grid.
struct FvsrnModel {
  ModelConfig config;
  MlpParams<float> mlp;
  FourierEncoder<float> spatial;
  FourierEncoder<float> temporal_encoder;
  KeyframeGrids<float> latent;  ///< empty without a grid; one entry for static models

  bool has_grid() const { return !latent.grids.empty(); }
  int input_width() const { return config.input_width(); }
  int output_width() const { return config.output_width(); }

  void validate() const {
    config.validate();
    mlp.validate();
    if (mlp.input_width() != config.input_width())
      throw ShapeError("model MLP input width " + std::to_string(mlp.input_width()) + " != assembled width " +
                       std::to_string(config.input_width()));
    if (mlp.output_width() != config.output_width()) throw ShapeError("model MLP output width mismatch");
    if (config.has_grid() != has_grid()) throw ShapeError("model grid presence does not match its config");
    if (has_grid()) {
      latent.validate();
      if (latent.R() != config.grid_resolution || latent.F() != config.grid_features)
        throw ShapeError("model grid shape does not match its config");
    }
    if (spatial.m != config.fourier_count()) throw ShapeError("model fourier matrix does not match its config");
  }
};

inline FourierEncoder<float> make_spatial_encoder(const ModelConfig& c) {
  const int d_in = c.direction == DirectionEncoding::DirF ? 6 : 3;
  const int m = c.fourier_count();
  switch (c.fourier) {
    case FourierMode::Off: return fourier_make<float>(FourierMode::Off, 0, d_in);
    case FourierMode::Nerf:
      return m % d_in == 0 ? fourier_make<float>(FourierMode::Nerf, m, d_in) : fourier_make_nerf_prefix<float>(m, d_in);
    case FourierMode::Random: return fourier_make<float>(FourierMode::Random, m, d_in, c.fourier_sigma, c.seed + 17);
  }
  throw ConfigError("unknown fourier mode");
}

inline FvsrnModel make_model(const ModelConfig& config) {
  config.validate();
  FvsrnModel m;
  m.config = config;
  m.spatial = make_spatial_encoder(config);
  if (config.time == TimeEncoding::Fourier || config.time == TimeEncoding::Both)
    m.temporal_encoder = fourier_make<float>(FourierMode::Nerf, config.time_frequencies, 1);
  m.mlp = init_params<float>(config.layers, config.channels, config.input_width(), config.output_width(), config.seed,
                             config.activation);
  if (config.has_grid()) {
    const std::vector<int> keys = config.keyframes.empty() ? std::vector<int>{0} : config.keyframes;
    m.latent.keys = keys;
    for (std::size_t k = 0; k < keys.size(); ++k)
      m.latent.grids.push_back(grid_init<float>(config.grid_resolution, config.grid_features, config.seed + 1000 + k));
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Input assembly
// ---------------------------------------------------------------------------

/// Per-sample record of how the latent vector was gathered, reused by the backward pass.
struct LatentTrace {
  TrilinearStencil<float> stencil;
  KeyframeBracket bracket;
};

/// Writes the assembled input row for one query into `out` (input_width() floats).
inline void assemble_input(const FvsrnModel& model, const ModelQuery& q, float* out, LatentTrace* trace = nullptr) {
  const ModelConfig& c = model.config;
  const int m = model.spatial.m;
  float spatial_in[6] = {q.p.x, q.p.y, q.p.z, q.d.x, q.d.y, q.d.z};
  out[0] = q.p.x;
  out[1] = q.p.y;
  out[2] = q.p.z;
  int o = 3;
  if (c.direction != DirectionEncoding::Pos) {
    out[3] = q.d.x;
    out[4] = q.d.y;
    out[5] = q.d.z;
    o = 6;
  }
  const int d_in = model.spatial.d_in;
  for (int r = 0; r < m; ++r) {
    const float* row = model.spatial.B.data() + static_cast<std::size_t>(r) * d_in;
    float arg = 0.f;
    for (int i = 0; i < d_in; ++i) arg += row[i] * spatial_in[i];
    out[o + r] = detail::sin_t(arg);
    out[o + m + r] = detail::cos_t(arg);
  }
  o += 2 * m;
  if (c.time != TimeEncoding::None) {
    const auto [lo, hi] = c.resolved_time_range();
    const float tn = hi > lo ? static_cast<float>((q.t - lo) / (hi - lo)) : 0.f;
    if (c.time == TimeEncoding::Direct || c.time == TimeEncoding::Both) out[o++] = tn;
    if (c.time == TimeEncoding::Fourier || c.time == TimeEncoding::Both) {
      const int L = model.temporal_encoder.m;
      for (int j = 0; j < L; ++j) {
        const float arg = model.temporal_encoder.B[static_cast<std::size_t>(j)] * tn;
        out[o + j] = detail::sin_t(arg);
        out[o + L + j] = detail::cos_t(arg);
      }
      o += 2 * L;
    }
  }
  if (model.has_grid()) {
    const auto& kfg = model.latent;
    LatentTrace tr;
    tr.stencil = grid_stencil<float>(kfg.R(), kfg.F(), q.p);
    tr.bracket = c.keyframes.empty() ? KeyframeBracket{} : keyframe_bracket(kfg.keys, q.t);
    float* z = out + o;
    for (int f = 0; f < kfg.F(); ++f) z[f] = 0.f;
    grid_gather(kfg.grids[tr.bracket.lo], tr.stencil, z, static_cast<float>(1.0 - tr.bracket.w), true);
    if (tr.bracket.hi != tr.bracket.lo && tr.bracket.w != 0.0)
      grid_gather(kfg.grids[tr.bracket.hi], tr.stencil, z, static_cast<float>(tr.bracket.w), true);
    if (trace) *trace = tr;
  }
}

inline std::vector<float> assemble_input(const FvsrnModel& model, Vec3 p, std::optional<Vec3> d = std::nullopt,
                                         std::optional<float> t = std::nullopt) {
  const ModelConfig& c = model.config;
  if (c.direction != DirectionEncoding::Pos && !d) throw ConfigError("this model requires a view direction");
  if (c.temporal() && !t) throw ConfigError("temporal model requires a timestep");
  if (!c.temporal() && t) throw ConfigError("timestep supplied to a non-temporal model");
  std::vector<float> out(static_cast<std::size_t>(model.input_width()));
  assemble_input(model, ModelQuery{p, d.value_or(Vec3{0, 0, 1}), t.value_or(0.f)}, out.data());
  return out;
}

/// Batch assembly into X (rows = queries).
inline void assemble_inputs(const FvsrnModel& model, std::span<const ModelQuery> queries, Matrix<float>& X,
                            std::vector<LatentTrace>* traces = nullptr) {
  X.resize(queries.size(), static_cast<std::size_t>(model.input_width()));
  if (traces) traces->resize(queries.size());
  for (std::size_t n = 0; n < queries.size(); ++n)
    assemble_input(model, queries[n], X.row(n), traces ? &(*traces)[n] : nullptr);
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

/// Applies sigmoid (density, rgb) and softplus (absorption) in place on one output row.
inline void head_apply(Head head, float* row) {
  if (head == Head::Density) {
    row[0] = detail::sigmoid(row[0]);
    return;
  }
  for (int c = 0; c < 3; ++c) row[c] = detail::sigmoid(row[c]);
  row[3] = detail::softplus(row[3]);
}

/// Turns adjoints of head outputs into adjoints of the raw network outputs.
inline void head_backward(Head head, const float* raw, const float* d_out, float* d_raw) {
  const int n = head == Head::Density ? 1 : 3;
  for (int c = 0; c < n; ++c) {
    const float s = detail::sigmoid(raw[c]);
    d_raw[c] = d_out[c] * s * (1.f - s);
  }
  if (head == Head::Color) d_raw[3] = d_out[3] * detail::sigmoid(raw[3]);
}

// ---------------------------------------------------------------------------
// Evaluation and backward
// ---------------------------------------------------------------------------

/// Reusable buffers for batch evaluation and backpropagation.
struct ModelWorkspace {
  Matrix<float> input;
  MlpCache<float> cache;
  std::vector<LatentTrace> traces;
  Matrix<float> d_input;
};

/// Raw (pre-head) network outputs for a batch.
inline const Matrix<float>& model_forward_raw(const FvsrnModel& model, std::span<const ModelQuery> queries,
                                              ModelWorkspace& ws) {
  assemble_inputs(model, queries, ws.input, model.has_grid() ? &ws.traces : nullptr);
  return mlp_forward(model.mlp, ws.input, ws.cache);
}

inline GradientBuffer<float> make_gradients(const FvsrnModel& model) {
  GradientBuffer<float> g(model.mlp);
  for (const auto& grid : model.latent.grids) g.grids.emplace_back(grid.values.size(), 0.f);
  return g;
}

/// Backpropagates adjoints of the raw outputs (same rows as the last forward)
/// into network and latent-grid gradients.
inline void model_backward_raw(const FvsrnModel& model, ModelWorkspace& ws, const Matrix<float>& d_raw,
                               GradientBuffer<float>& grads) {
  if (grads.grids.size() != model.latent.grids.size()) throw ShapeError("gradient buffer lacks grid slots");
  mlp_backward(model.mlp, ws.cache, d_raw, grads, model.has_grid() ? &ws.d_input : nullptr);
  if (!model.has_grid()) return;
  const int off = model.config.latent_offset();
  const int F = model.latent.F();
  for (std::size_t n = 0; n < d_raw.rows; ++n) {
    const float* zbar = ws.d_input.row(n) + off;
    const LatentTrace& tr = ws.traces[n];
    grid_scatter(F, tr.stencil, zbar, grads.grids[tr.bracket.lo].data(), static_cast<float>(1.0 - tr.bracket.w));
    if (tr.bracket.hi != tr.bracket.lo && tr.bracket.w != 0.0)
      grid_scatter(F, tr.stencil, zbar, grads.grids[tr.bracket.hi].data(), static_cast<float>(tr.bracket.w));
  }
}

/// Parameter tensors in the order of gradient_views(): MLP layers then grids.
inline std::vector<std::span<float>> model_parameter_views(FvsrnModel& model) {
  auto v = parameter_views(model.mlp);
  for (auto& g : model.latent.grids) v.emplace_back(g.values);
  return v;
}

inline void check_queries(const FvsrnModel& model, std::span<const ModelQuery> queries) {
  if (!model.config.temporal()) return;
  const auto [lo, hi] = model.config.resolved_time_range();
  for (const auto& q : queries)
    if (!(q.t >= lo - 1e-6 && q.t <= hi + 1e-6)) throw ConfigError("timestep outside the model's time range");
}

inline std::vector<float> eval_density(const FvsrnModel& model, std::span<const ModelQuery> queries) {
  if (model.config.head != Head::Density) throw ConfigError("eval_density requires a density-head model");
  check_queries(model, queries);
  ModelWorkspace ws;
  const auto& Y = model_forward_raw(model, queries, ws);
  std::vector<float> out(queries.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = detail::sigmoid(Y(n, 0));
  return out;
}

inline std::vector<ColorSample> eval_color(const FvsrnModel& model, std::span<const ModelQuery> queries) {
  if (model.config.head != Head::Color) throw ConfigError("eval_color requires a color-head model");
  check_queries(model, queries);
  ModelWorkspace ws;
  const auto& Y = model_forward_raw(model, queries, ws);
  std::vector<ColorSample> out(queries.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    float row[4] = {Y(n, 0), Y(n, 1), Y(n, 2), Y(n, 3)};
    head_apply(Head::Color, row);
    out[n] = {{row[0], row[1], row[2]}, row[3]};
  }
  return out;
}

/// Samples a density model on an res^3 lattice.
inline ScalarVolume model_decode_volume(const FvsrnModel& model, int res, std::optional<float> t = std::nullopt) {
  if (model.config.head != Head::Density) throw ConfigError("only density models decode to a scalar volume");
  ScalarVolume vol(res, res, res);
  std::vector<ModelQuery> qs(static_cast<std::size_t>(res) * res);
  for (int z = 0; z < res; ++z) {
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) qs[static_cast<std::size_t>(y) * res + x] = {vol.voxel_position(x, y, z), {0, 0, 1}, t.value_or(0.f)};
    const auto d = eval_density(model, qs);
    std::copy(d.begin(), d.end(), vol.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(z) * res * res));
  }
  return vol;
}

}  // namespace fvsrn
