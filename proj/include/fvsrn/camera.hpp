// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <json.hpp>

#include "fvsrn/common.hpp"

namespace fvsrn {

struct Ray {
  Vec3 origin;
  Vec3 direction;  ///< unit length
};

/// Pinhole camera looking at `target`.
struct Camera {
  Vec3 eye{0.5f, 0.5f, 2.5f};
  Vec3 target{0.5f, 0.5f, 0.5f};
  Vec3 up{0.f, 1.f, 0.f};
  float fov_y = 0.7853981634f;  ///< radians
  int width = 128;
  int height = 128;

  void validate() const {
    if (!isfinite(eye) || !isfinite(target) || !isfinite(up)) throw ConfigError("camera contains non-finite values");
    const Vec3 fwd = target - eye;
    if (length(fwd) <= 0.f) throw ConfigError("camera eye and target coincide");
    if (length(cross(normalize(fwd), normalize(up))) < 1e-6f) throw ConfigError("camera up is parallel to the view direction");
    if (!(fov_y > 0.f && fov_y < static_cast<float>(kPi))) throw ConfigError("camera fov_y must lie in (0, pi)");
    if (width <= 0 || height <= 0) throw ConfigError("camera resolution must be positive");
  }
};

/// One ray per pixel through the pixel center; row 0 is the top of the image.
inline std::vector<Ray> camera_rays(const Camera& cam) {
  cam.validate();
  const Vec3 fwd = normalize(cam.target - cam.eye);
  const Vec3 right = normalize(cross(fwd, cam.up));
  const Vec3 upv = cross(right, fwd);
  const double tan_half = std::tan(0.5 * static_cast<double>(cam.fov_y));
  const double aspect = static_cast<double>(cam.width) / cam.height;
  std::vector<Ray> rays(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double u = (2.0 * (x + 0.5) / cam.width - 1.0) * tan_half * aspect;
      const double v = (1.0 - 2.0 * (y + 0.5) / cam.height) * tan_half;
      const Vec3 d = fwd + right * static_cast<float>(u) + upv * static_cast<float>(v);
      rays[static_cast<std::size_t>(y) * cam.width + x] = {cam.eye, normalize(d)};
    }
  return rays;
}

/// Cameras on a Fibonacci sphere around the unit-cube center.
inline std::vector<Camera> orbit_cameras(int count, int width, int height, float distance = 2.f,
                                         float fov_y = 0.7853981634f) {
  std::vector<Camera> cams;
  const Vec3 center{0.5f, 0.5f, 0.5f};
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    Camera c;
    c.eye = center + Vec3{static_cast<float>(r * std::cos(phi)), static_cast<float>(y),
                          static_cast<float>(r * std::sin(phi))} * distance;
    c.target = center;
    c.up = std::abs(y) > 0.99 ? Vec3{1.f, 0.f, 0.f} : Vec3{0.f, 1.f, 0.f};
    c.fov_y = fov_y;
    c.width = width;
    c.height = height;
    cams.push_back(c);
  }
  return cams;
}

/// Camera JSON: {"eye":[x,y,z], "target":[..], "up":[..], "fov_y_deg": f}; width/height optional.
inline Camera camera_from_json(const nlohmann::json& j, Camera base = {}) {
  auto vec = [&](const char* key, Vec3 def) {
    if (!j.contains(key)) return def;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("camera.") + key + " must be [x,y,z]");
    return Vec3{a[0].get<float>(), a[1].get<float>(), a[2].get<float>()};
  };
  try {
    base.eye = vec("eye", base.eye);
    base.target = vec("target", base.target);
    base.up = vec("up", base.up);
    if (j.contains("fov_y_deg")) base.fov_y = j.at("fov_y_deg").get<float>() * static_cast<float>(kPi / 180.0);
    if (j.contains("width")) base.width = j.at("width").get<int>();
    if (j.contains("height")) base.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid camera JSON: ") + e.what());
  }
  return base;
}

inline nlohmann::json camera_to_json(const Camera& c) {
  return {{"eye", {c.eye.x, c.eye.y, c.eye.z}},
          {"target", {c.target.x, c.target.y, c.target.z}},
          {"up", {c.up.x, c.up.y, c.up.z}},
          {"fov_y_deg", c.fov_y * 180.0 / kPi},
          {"width", c.width},
          {"height", c.height}};
}

}  // namespace fvsrn
