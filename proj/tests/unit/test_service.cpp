// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "fvsrn/service.hpp"
#include "test_util.hpp"

namespace fvsrn {
namespace {

using nlohmann::json;

ModelConfig small_config() {
  ModelConfig c;
  c.layers = 2;
  c.channels = 16;
  c.grid_resolution = 4;
  c.grid_features = 4;
  return c;
}

std::string render_body(int w = 16, int h = 12, json extra = json::object()) {
  json j{{"camera", {{"eye", {0.5, 0.5, -1.5}}, {"target", {0.5, 0.5, 0.5}}, {"up", {0, 1, 0}}}},
         {"width", w},
         {"height", h},
         {"stepsize_voxels", 1.0}};
  j.update(extra);
  return j.dump();
}

bool is_png(const std::string& s) { return s.size() > 8 && s.compare(0, 8, "\x89PNG\r\n\x1a\n") == 0; }

TEST(Service, InfoBeforeAndAfterLoad) {
  RenderService svc;
  EXPECT_EQ(svc.info().status, 503);
  EXPECT_EQ(svc.render(render_body()).status, 503);
  svc.load(make_model(ModelConfig{}));
  const auto r = svc.info();
  ASSERT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["memory"]["grid_bytes"], 2097152);
  EXPECT_EQ(j["memory"]["network_bytes_f16"], 7362);
  EXPECT_EQ(j["parameters"], 3681);
  EXPECT_TRUE(j["temporal_span"].is_null());
  EXPECT_EQ(j["config"], config_to_json(ModelConfig{}));
  EXPECT_EQ(svc.info().body, r.body);
}

TEST(Service, TemporalSpanReported) {
  ModelConfig c = small_config();
  c.keyframes = {0, 10, 20};
  RenderService svc;
  svc.load(make_model(c));
  const auto j = json::parse(svc.info().body);
  EXPECT_EQ(j["temporal_span"], json::array({0.0, 20.0}));
  EXPECT_EQ(svc.render(render_body()).status, 422);
  EXPECT_EQ(svc.render(render_body(16, 12, {{"t", 25}})).status, 422);
  EXPECT_EQ(svc.render(render_body(16, 12, {{"t", 5.5}})).status, 200);
}

TEST(Service, RenderDeterministicPng) {
  RenderService svc;
  svc.load(make_model(small_config()));
  const auto a = svc.render(render_body()), b = svc.render(render_body());
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.content_type, "image/png");
  EXPECT_TRUE(is_png(a.body));
  EXPECT_EQ(a.body, b.body);
  EXPECT_GE(a.render_ms, 0.0);
}

TEST(Service, RenderMatchesLibrary) {
  const auto model = make_model(small_config());
  RenderService svc;
  svc.load(model);
  Camera cam = camera_from_json(json::parse(render_body())["camera"]);
  cam.width = 16;
  cam.height = 12;
  RenderSettings s;
  s.stepsize = stepsize_from_voxels(1.f, 64);
  const TransferFunction tf;
  EXPECT_EQ(svc.render(render_body()).body, image_encode_png(render_image(model, cam, s, &tf)));
}

TEST(Service, ValidationErrors) {
  RenderService svc;
  svc.load(make_model(small_config()));
  EXPECT_EQ(svc.render(render_body(0, 12)).status, 422);
  EXPECT_EQ(svc.render(render_body(16, 100000)).status, 422);
  EXPECT_EQ(svc.render("{not json").status, 422);
  EXPECT_EQ(svc.render("[1,2]").status, 422);
  EXPECT_EQ(svc.render(render_body(16, 12, {{"stepsize_voxels", -1}})).status, 422);
  EXPECT_EQ(svc.render(render_body(16, 12, {{"t", 1}})).status, 422);
  EXPECT_EQ(svc.render(render_body(16, 12, {{"tf", "no_such_preset"}})).status, 422);
  const auto err = svc.render(render_body(0, 12));
  EXPECT_TRUE(json::parse(err.body).contains("error"));
}

TEST(Service, TransferFunctionHandling) {
  RenderService svc;
  svc.load(make_model(small_config()));
  const auto a = svc.render(render_body(16, 12, {{"tf", "ramp"}}));
  const auto b = svc.render(render_body(16, 12, {{"tf", tf_to_json(tf_heat())}}));
  ASSERT_EQ(a.status, 200);
  ASSERT_EQ(b.status, 200);
  EXPECT_NE(a.body, b.body);

  ModelConfig c = small_config();
  c.head = Head::Color;
  RenderService color;
  color.load(make_model(c));
  EXPECT_EQ(color.render(render_body(16, 12, {{"tf", "ramp"}})).status, 409);
  EXPECT_EQ(color.render(render_body()).status, 200);
}

TEST(Service, ConcurrentRendersAgree) {
  RenderService svc;
  svc.load(make_model(small_config()));
  const std::string ref = svc.render(render_body(24, 24)).body;
  std::vector<std::future<std::string>> fs;
  for (int i = 0; i < 4; ++i)
    fs.push_back(std::async(std::launch::async, [&] { return svc.render(render_body(24, 24)).body; }));
  for (auto& f : fs) EXPECT_EQ(f.get(), ref);
}

TEST(Service, HttpEndpoints) {
  RenderService svc;
  svc.load(make_model(small_config()));
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto info = cli.Get("/model/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  EXPECT_EQ(info->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(json::parse(info->body)["parameters"], make_model(small_config()).mlp.parameter_count());

  auto png = cli.Post("/render", render_body(), "application/json");
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  EXPECT_TRUE(png->has_header("X-Render-Ms"));
  EXPECT_GE(std::stod(png->get_header_value("X-Render-Ms")), 0.0);
  EXPECT_EQ(png->body, svc.render(render_body()).body);

  auto bad = cli.Post("/render", render_body(-3, 4), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  auto pre = cli.Options("/render");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Headers"), "Content-Type");

  server.stop();
  th.join();
}

}  // namespace
}  // namespace fvsrn
