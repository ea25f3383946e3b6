// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <json.hpp>

#include "fvsrn/latent_grid.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

enum class WeightPrecision { F16, F32 };
enum class GridPrecision { U8, F32 };

inline WeightPrecision weight_precision_from_string(std::string_view s) {
  if (s == "f16") return WeightPrecision::F16;
  if (s == "f32") return WeightPrecision::F32;
  throw ConfigError("unknown weight precision '" + std::string(s) + "'");
}
inline const char* to_string(WeightPrecision p) { return p == WeightPrecision::F16 ? "f16" : "f32"; }
inline GridPrecision grid_precision_from_string(std::string_view s) {
  if (s == "u8") return GridPrecision::U8;
  if (s == "f32") return GridPrecision::F32;
  throw ConfigError("unknown grid precision '" + std::string(s) + "'");
}
inline const char* to_string(GridPrecision p) { return p == GridPrecision::U8 ? "u8" : "f32"; }

struct MemoryFootprint {
  std::size_t network = 0;
  std::size_t grid = 0;
  std::size_t total() const { return network + grid; }
};

/// Network: parameter count x element size. Grid: R^3 F x element size per
/// keyframe grid, plus a per-channel min/max float table for u8.
inline MemoryFootprint memory_footprint(const FvsrnModel& model, WeightPrecision wp, GridPrecision gp) {
  MemoryFootprint f;
  f.network = model.mlp.parameter_count() * (wp == WeightPrecision::F16 ? 2 : 4);
  for (const auto& g : model.latent.grids) {
    if (gp == GridPrecision::F32)
      f.grid += g.values.size() * 4;
    else
      f.grid += g.values.size() + 8 * static_cast<std::size_t>(g.F);
  }
  return f;
}

namespace detail {

inline constexpr char kCheckpointMagic[4] = {'F', 'V', 'S', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_f16_le(std::string& out, float v) {
  const auto bits = Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(v));
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>(bits >> 8));
}
inline float read_f16_le(const unsigned char* p) {
  const auto bits = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  return static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
}

/// Bounds-checked reader over the payload.
struct PayloadReader {
  const unsigned char* base;
  std::size_t size;
  std::size_t header_bytes;
  std::size_t pos = 0;

  const unsigned char* take(std::size_t n) {
    if (pos + n > size) throw FormatError("checkpoint payload truncated", header_bytes + pos);
    const auto* p = base + pos;
    pos += n;
    return p;
  }
  float f32() { return read_f32_le(take(4)); }
  float f16() { return read_f16_le(take(2)); }
};

}  // namespace detail

inline std::string checkpoint_encode(const FvsrnModel& model, WeightPrecision wp = WeightPrecision::F32,
                                     GridPrecision gp = GridPrecision::F32) {
  model.validate();
  std::string payload;
  for (const auto& l : model.mlp.layers) {
    for (float v : l.weight) wp == WeightPrecision::F16 ? detail::write_f16_le(payload, v) : detail::write_f32_le(payload, v);
    for (float v : l.bias) wp == WeightPrecision::F16 ? detail::write_f16_le(payload, v) : detail::write_f32_le(payload, v);
  }
  const std::size_t weights_bytes = payload.size();
  for (float v : model.spatial.B) detail::write_f32_le(payload, v);
  for (float v : model.temporal_encoder.B) detail::write_f32_le(payload, v);
  const std::size_t fourier_bytes = payload.size() - weights_bytes;
  for (const auto& g : model.latent.grids) {
    if (gp == GridPrecision::F32) {
      for (float v : g.values) detail::write_f32_le(payload, v);
    } else {
      const auto q = grid_quantize(g);
      for (float v : q.channel_min) detail::write_f32_le(payload, v);
      for (float v : q.channel_max) detail::write_f32_le(payload, v);
      payload.append(reinterpret_cast<const char*>(q.codes.data()), q.codes.size());
    }
  }
  const std::size_t grid_bytes = payload.size() - weights_bytes - fourier_bytes;

  nlohmann::json header{{"config", config_to_json(model.config)},
                        {"weight_precision", to_string(wp)},
                        {"grid_precision", to_string(gp)},
                        {"layers", nlohmann::json::array()},
                        {"fourier_rows", model.spatial.m},
                        {"time_fourier_rows", model.temporal_encoder.m},
                        {"grid_count", model.latent.grids.size()},
                        {"payload",
                         {{"weights", {{"offset", 0}, {"bytes", weights_bytes}}},
                          {"fourier", {{"offset", weights_bytes}, {"bytes", fourier_bytes}}},
                          {"grids", {{"offset", weights_bytes + fourier_bytes}, {"bytes", grid_bytes}}},
                          {"bytes", payload.size()}}}};
  for (const auto& l : model.mlp.layers) header["layers"].push_back({l.in, l.out});
  const std::string js = header.dump();

  std::string out(detail::kCheckpointMagic, 4);
  detail::write_u32_le(out, detail::kCheckpointVersion);
  detail::write_u32_le(out, static_cast<std::uint32_t>(js.size()));
  out += js;
  out += payload;
  return out;
}

inline FvsrnModel checkpoint_decode(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(p, detail::kCheckpointMagic, 4) != 0)
    throw FormatError("bad checkpoint magic, expected 'FVSN'", 0);
  if (bytes.size() < 12) throw FormatError("checkpoint header truncated", bytes.size());
  const std::uint32_t version = detail::read_u32_le(p + 4);
  if (version != detail::kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  const std::uint32_t js_len = detail::read_u32_le(p + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(js_len)) throw FormatError("checkpoint JSON header truncated", 8);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, js_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint JSON header is invalid: ") + e.what(), 12);
  }
  const std::size_t payload_start = 12 + static_cast<std::size_t>(js_len);
  const std::size_t payload_size = bytes.size() - payload_start;

  FvsrnModel model;
  WeightPrecision wp;
  GridPrecision gp;
  std::size_t declared_bytes;
  try {
    model = make_model(config_from_json(header.at("config")));
    wp = weight_precision_from_string(header.at("weight_precision").get<std::string>());
    gp = grid_precision_from_string(header.at("grid_precision").get<std::string>());
    declared_bytes = header.at("payload").at("bytes").get<std::size_t>();
    if (header.at("fourier_rows").get<int>() != model.spatial.m ||
        header.at("time_fourier_rows").get<int>() != model.temporal_encoder.m ||
        header.at("grid_count").get<std::size_t>() != model.latent.grids.size())
      throw FormatError("checkpoint header is inconsistent with its config", 12);
    const auto& layers = header.at("layers");
    if (layers.size() != model.mlp.layers.size()) throw FormatError("checkpoint layer count mismatch", 12);
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].at(0).get<int>() != model.mlp.layers[i].in || layers[i].at(1).get<int>() != model.mlp.layers[i].out)
        throw FormatError("checkpoint layer shape mismatch", 12);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is missing fields: ") + e.what(), 12);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what(), 12);
  }
  if (declared_bytes != payload_size) {
    if (payload_size < declared_bytes) throw FormatError("checkpoint payload truncated", bytes.size());
    throw FormatError("checkpoint payload length does not match its header", payload_start);
  }

  detail::PayloadReader r{p + payload_start, payload_size, payload_start};
  for (auto& l : model.mlp.layers) {
    for (auto& v : l.weight) v = wp == WeightPrecision::F16 ? r.f16() : r.f32();
    for (auto& v : l.bias) v = wp == WeightPrecision::F16 ? r.f16() : r.f32();
  }
  for (auto& v : model.spatial.B) v = r.f32();
  for (auto& v : model.temporal_encoder.B) v = r.f32();
  for (auto& g : model.latent.grids) {
    if (gp == GridPrecision::F32) {
      for (auto& v : g.values) v = r.f32();
    } else {
      QuantizedLatentGrid q;
      q.R = g.R;
      q.F = g.F;
      q.channel_min.resize(static_cast<std::size_t>(g.F));
      q.channel_max.resize(static_cast<std::size_t>(g.F));
      for (auto& v : q.channel_min) v = r.f32();
      for (auto& v : q.channel_max) v = r.f32();
      const auto* c = r.take(g.values.size());
      q.codes.assign(c, c + g.values.size());
      g = grid_dequantize<float>(q);
    }
  }
  if (r.pos != payload_size) throw FormatError("checkpoint payload has trailing bytes", payload_start + r.pos);
  return model;
}

inline void checkpoint_save(const FvsrnModel& model, const std::string& path, WeightPrecision wp = WeightPrecision::F32,
                            GridPrecision gp = GridPrecision::F32) {
  detail::write_file(path, checkpoint_encode(model, wp, gp));
}

inline FvsrnModel checkpoint_load(const std::string& path) { return checkpoint_decode(detail::read_file(path)); }

}  // namespace fvsrn
