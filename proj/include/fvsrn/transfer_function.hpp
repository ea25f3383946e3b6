// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fvsrn/common.hpp"

namespace fvsrn {

struct TfPoint {
  float x = 0.f;
  Vec3 rgb;
  float sigma = 0.f;  ///< absorption per unit length (unit cube)
};

struct TfSample {
  Vec3 rgb;
  float sigma = 0.f;
};

/// Piecewise-linear map from density to color and absorption.
class TransferFunction {
 public:
  TransferFunction() : TransferFunction(std::vector<TfPoint>{{0.f, {0, 0, 0}, 0.f}, {1.f, {1, 1, 1}, 20.f}}) {}

  explicit TransferFunction(std::vector<TfPoint> points) : points_(std::move(points)) { validate(); }

  const std::vector<TfPoint>& points() const { return points_; }

  TfSample operator()(float density) const {
    const float d = std::isfinite(density) ? std::clamp(density, 0.f, 1.f) : 0.f;
    const auto it = std::upper_bound(points_.begin(), points_.end(), d,
                                     [](float v, const TfPoint& p) { return v < p.x; });
    if (it == points_.end()) return {points_.back().rgb, points_.back().sigma};
    const TfPoint& hi = *it;
    const TfPoint& lo = *(it - 1);
    const float w = (d - lo.x) / (hi.x - lo.x);
    return {lo.rgb + (hi.rgb - lo.rgb) * w, lo.sigma + (hi.sigma - lo.sigma) * w};
  }

  /// Largest |d(component)/d(density)| over all segments.
  float lipschitz() const {
    float l = 0.f;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const float dx = points_[i].x - points_[i - 1].x;
      for (int c = 0; c < 3; ++c) l = std::max(l, std::abs(points_[i].rgb[c] - points_[i - 1].rgb[c]) / dx);
      l = std::max(l, std::abs(points_[i].sigma - points_[i - 1].sigma) / dx);
    }
    return l;
  }

  float max_sigma() const {
    float m = 0.f;
    for (const auto& p : points_) m = std::max(m, p.sigma);
    return m;
  }

 private:
  void validate() const {
    if (points_.size() < 2) throw ConfigError("transfer function needs at least two control points");
    if (points_.front().x != 0.f || points_.back().x != 1.f)
      throw ConfigError("transfer function must start at x=0 and end at x=1");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.sigma) || !isfinite(p.rgb))
        throw ConfigError("transfer function contains non-finite values");
      if (i > 0 && !(p.x > points_[i - 1].x)) throw ConfigError("transfer function x must be strictly increasing");
      for (int c = 0; c < 3; ++c)
        if (p.rgb[c] < 0.f || p.rgb[c] > 1.f) throw ConfigError("transfer function rgb outside [0,1]");
      if (p.sigma < 0.f) throw ConfigError("transfer function sigma must be non-negative");
    }
  }

  std::vector<TfPoint> points_;
};

inline TfSample tf_eval(const TransferFunction& tf, float density) { return tf(density); }

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Black-to-white ramp with linearly increasing absorption.
inline TransferFunction tf_ramp(float max_sigma = 20.f) {
  return TransferFunction({{0.f, {0, 0, 0}, 0.f}, {1.f, {1, 1, 1}, max_sigma}});
}

/// Red over yellow to white, absorption increasing linearly.
inline TransferFunction tf_heat(float max_sigma = 20.f) {
  return TransferFunction({{0.f, {0, 0, 0}, 0.f},
                           {0.33f, {0.8f, 0.05f, 0.05f}, max_sigma * 0.33f},
                           {0.66f, {1.f, 0.85f, 0.1f}, max_sigma * 0.66f},
                           {1.f, {1, 1, 1}, max_sigma}});
}

/// Two narrow peaks, purple and yellow; zero elsewhere.
inline TransferFunction tf_two_peaks(float peak_sigma = 60.f, float half_width = 0.04f) {
  const Vec3 black{0, 0, 0};
  const Vec3 purple{0.55f, 0.1f, 0.75f};
  const Vec3 yellow{1.f, 0.9f, 0.1f};
  const float a = 0.35f, b = 0.7f;
  return TransferFunction({{0.f, black, 0.f},
                           {a - half_width, black, 0.f},
                           {a, purple, peak_sigma},
                           {a + half_width, black, 0.f},
                           {b - half_width, black, 0.f},
                           {b, yellow, peak_sigma},
                           {b + half_width, black, 0.f},
                           {1.f, black, 0.f}});
}

inline TransferFunction tf_preset(std::string_view name) {
  if (name == "ramp") return tf_ramp();
  if (name == "heat") return tf_heat();
  if (name == "two_peaks" || name == "two-peaks") return tf_two_peaks();
  throw ConfigError("unknown transfer function preset '" + std::string(name) + "'");
}

inline std::vector<std::string> tf_preset_names() { return {"ramp", "heat", "two_peaks"}; }

// ---------------------------------------------------------------------------
// JSON: array of {"x":..., "rgb":[r,g,b], "sigma":...}
// ---------------------------------------------------------------------------

inline nlohmann::json tf_to_json(const TransferFunction& tf) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : tf.points())
    arr.push_back({{"x", p.x}, {"rgb", {p.rgb.x, p.rgb.y, p.rgb.z}}, {"sigma", p.sigma}});
  return arr;
}

inline TransferFunction tf_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("transfer function JSON must be an array");
  std::vector<TfPoint> pts;
  try {
    for (const auto& e : j) {
      TfPoint p;
      p.x = e.at("x").get<float>();
      const auto& rgb = e.at("rgb");
      if (!rgb.is_array() || rgb.size() != 3) throw ConfigError("rgb must have three components");
      p.rgb = {rgb[0].get<float>(), rgb[1].get<float>(), rgb[2].get<float>()};
      p.sigma = e.at("sigma").get<float>();
      pts.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid transfer function JSON: ") + e.what());
  }
  return TransferFunction(std::move(pts));
}

}  // namespace fvsrn
