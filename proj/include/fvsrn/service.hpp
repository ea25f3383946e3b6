// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

// Library headers (and Eigen) precede httplib, whose resolver include defines a _res macro.
#include "fvsrn/camera.hpp"
#include "fvsrn/checkpoint.hpp"
#include "fvsrn/image.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/renderer.hpp"
#include "fvsrn/transfer_function.hpp"

#include <httplib.h>

namespace fvsrn {

/// Reply of one endpoint, independent of the HTTP transport.
struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  double render_ms = -1.0;  ///< set by /render
};

struct ServiceOptions {
  int render_threads = 1;       ///< workers per render request
  int server_threads = 4;       ///< concurrent requests
  int max_image_side = 4096;
  int fallback_resolution = 64;  ///< stepsize_voxels reference when the model does not record one
};

/// Read-only session over one loaded model.
class RenderService {
 public:
  explicit RenderService(ServiceOptions opt = {}) : opt_(opt) {}

  void load(FvsrnModel model, TransferFunction default_tf = TransferFunction()) {
    model.validate();
    model_ = std::make_shared<const FvsrnModel>(std::move(model));
    default_tf_ = std::move(default_tf);
  }
  void load_file(const std::string& path) { load(checkpoint_load(path)); }
  bool loaded() const { return model_ != nullptr; }

  ServiceResponse info() const {
    if (!model_) return error(503, "no model loaded");
    const auto f32 = memory_footprint(*model_, WeightPrecision::F32, GridPrecision::F32);
    const auto packed = memory_footprint(*model_, WeightPrecision::F16, GridPrecision::U8);
    nlohmann::json j{{"config", config_to_json(model_->config)},
                     {"memory",
                      {{"network_bytes", f32.network},
                       {"grid_bytes", f32.grid},
                       {"total_bytes", f32.total()},
                       {"network_bytes_f16", packed.network},
                       {"grid_bytes_u8", packed.grid}}},
                     {"parameters", model_->mlp.parameter_count()},
                     {"temporal_span", nullptr},
                     {"tf_presets", tf_preset_names()},
                     {"default_tf", tf_to_json(default_tf_)}};
    if (model_->config.temporal()) {
      const auto [lo, hi] = model_->config.resolved_time_range();
      j["temporal_span"] = {lo, hi};
    }
    return {200, "application/json", j.dump(), -1.0};
  }

  /// Body: {camera, width, height, stepsize_voxels, tf?, t?}; returns PNG bytes.
  ServiceResponse render(const std::string& body) const {
    const auto model = model_;
    if (!model) return error(503, "no model loaded");
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return error(422, std::string("request body is not valid JSON: ") + e.what());
    }
    if (!req.is_object()) return error(422, "request body must be a JSON object");
    try {
      Camera cam = camera_from_json(req.value("camera", nlohmann::json::object()));
      cam.width = get_int(req, "width", cam.width);
      cam.height = get_int(req, "height", cam.height);
      if (cam.width < 1 || cam.height < 1 || cam.width > opt_.max_image_side || cam.height > opt_.max_image_side)
        return error(422, "width and height must lie in [1, " + std::to_string(opt_.max_image_side) + "]");
      cam.validate();

      RenderSettings s;
      s.workers = opt_.render_threads;
      const double sv = req.contains("stepsize_voxels") ? req.at("stepsize_voxels").get<double>() : 1.0;
      if (!(sv > 0.0) || !std::isfinite(sv)) return error(422, "stepsize_voxels must be positive");
      const int res = model->config.volume_resolution > 0 ? model->config.volume_resolution : opt_.fallback_resolution;
      s.stepsize = stepsize_from_voxels(static_cast<float>(sv), res);

      std::optional<TransferFunction> tf;
      if (req.contains("tf") && !req.at("tf").is_null()) {
        if (model->config.head == Head::Color)
          return error(409, "transfer functions apply to density-head models only");
        const auto& jt = req.at("tf");
        tf = jt.is_string() ? tf_preset(jt.get<std::string>()) : tf_from_json(jt);
      }
      std::optional<float> t;
      if (req.contains("t") && !req.at("t").is_null()) t = req.at("t").get<float>();
      if (model->config.temporal()) {
        if (!t) return error(422, "temporal model requires t");
        const auto [lo, hi] = model->config.resolved_time_range();
        if (!(*t >= lo && *t <= hi)) return error(422, "t lies outside the keyframe span");
      } else if (t) {
        return error(422, "t supplied to a non-temporal model");
      }

      const auto t0 = std::chrono::steady_clock::now();
      const TransferFunction* use_tf =
          model->config.head == Head::Density ? (tf ? &*tf : &default_tf_) : nullptr;
      const Image img = render_image(*model, cam, s, use_tf, t);
      std::string png = image_encode_png(img);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return {200, "image/png", std::move(png), ms};
    } catch (const nlohmann::json::exception& e) {
      return error(422, std::string("invalid request: ") + e.what());
    } catch (const ConfigError& e) {
      return error(422, e.what());
    } catch (const ShapeError& e) {
      return error(422, e.what());
    }
  }

  /// Registers the endpoints on an httplib server.
  void mount(httplib::Server& server) const {
    server.Get("/model/info", [this](const httplib::Request&, httplib::Response& res) { reply(info(), res); });
    server.Post("/render", [this](const httplib::Request& req, httplib::Response& res) { reply(render(req.body), res); });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { cors(res); });
  }

  /// Blocks serving on host:port until stop() is called from another thread.
  bool listen(httplib::Server& server, const std::string& host, int port) const {
    const int n = std::max(1, opt_.server_threads);
    server.new_task_queue = [n] { return new httplib::ThreadPool(static_cast<std::size_t>(n)); };
    mount(server);
    return server.listen(host, port);
  }

 private:
  static ServiceResponse error(int status, const std::string& msg) {
    return {status, "application/json", nlohmann::json{{"error", msg}}.dump(), -1.0};
  }

  static int get_int(const nlohmann::json& j, const char* key, int def) {
    if (!j.contains(key)) return def;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
    return v.get<int>();
  }

  static void cors(httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Expose-Headers", "X-Render-Ms");
  }

  static void reply(const ServiceResponse& r, httplib::Response& res) {
    cors(res);
    res.status = r.status;
    if (r.render_ms >= 0.0) res.set_header("X-Render-Ms", std::to_string(r.render_ms));
    res.set_content(r.body, r.content_type);
  }

  ServiceOptions opt_;
  std::shared_ptr<const FvsrnModel> model_;
  TransferFunction default_tf_;
};

}  // namespace fvsrn
