// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"

namespace fvsrn {
namespace {

ModelConfig tiny_config(int R = 4) {
  ModelConfig c;
  c.layers = 2;
  c.channels = 16;
  c.grid_resolution = R;
  c.grid_features = 4;
  return c;
}

WorldTrainConfig tiny_train(int epochs) {
  WorldTrainConfig w;
  w.samples = 4096;
  w.batch = 256;
  w.epochs = epochs;
  return w;
}

std::vector<int> voxel_counts(const WorldDataset& ds, int r) {
  std::vector<int> counts(static_cast<std::size_t>(r) * r * r, 0);
  for (const auto& q : ds.queries) {
    int idx[3];
    for (int a = 0; a < 3; ++a) idx[a] = std::min(r - 1, static_cast<int>(q.p[a] * r));
    ++counts[(static_cast<std::size_t>(idx[2]) * r + idx[1]) * r + idx[0]];
  }
  return counts;
}

TEST(Sampling, DeterministicPerSeed) {
  const auto vol = synth_field("gaussians", 16);
  const auto t = TargetField::of(vol);
  const auto a = sample_world_dataset(t, Head::Density, 500, Sampler::Uniform, 3);
  const auto b = sample_world_dataset(t, Head::Density, 500, Sampler::Uniform, 3);
  EXPECT_EQ(a.values.data, b.values.data);
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(a.queries[i].p.x, b.queries[i].p.x);
  EXPECT_THROW(sample_world_dataset(t, Head::Density, 0, Sampler::Uniform, 3), ConfigError);
}

TEST(Sampling, ColorTargetsUseTransferFunction) {
  const ScalarVolume vol(4, 4, 4, 0.5f);
  const TransferFunction tf({{0.f, {0, 0, 0}, 0.f}, {1.f, {1, 0.5f, 0}, 10.f}});
  const auto ds = sample_world_dataset(TargetField::of(vol, &tf), Head::Color, 10, Sampler::Uniform, 1);
  EXPECT_FLOAT_EQ(ds.values(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(ds.values(0, 1), 0.25f);
  EXPECT_FLOAT_EQ(ds.values(0, 3), 0.5f);  // sigma 5 scaled by 1 / max_sigma
  EXPECT_THROW(sample_world_dataset(TargetField::of(vol), Head::Color, 10, Sampler::Uniform, 1), ConfigError);
}

TEST(Sampling, ImportanceConcentratedVoxel) {
  const ScalarVolume vol(4, 4, 4, 0.5f);
  ErrorGrid g{4, std::vector<double>(64, 0.0)};
  g.error[(2 * 4 + 1) * 4 + 3] = 1.0;  // voxel (3, 1, 2)
  const auto ds = sample_world_dataset(TargetField::of(vol), Head::Density, 1000, Sampler::Importance, 5, &g);
  for (const auto& q : ds.queries) {
    ASSERT_GE(q.p.x, 0.75f);
    ASSERT_LE(q.p.x, 1.f);
    ASSERT_GE(q.p.y, 0.25f);
    ASSERT_LE(q.p.y, 0.5f);
    ASSERT_GE(q.p.z, 0.5f);
    ASSERT_LE(q.p.z, 0.75f);
  }
}

TEST(Sampling, ImportanceUniformGridChiSquare) {
  const ScalarVolume vol(4, 4, 4, 0.5f);
  const int r = 4;
  const std::size_t n = 64000;
  ErrorGrid g{r, std::vector<double>(64, 0.3)};
  // chi-square critical value for 63 degrees of freedom at p = 0.01
  const double critical = 92.01;
  for (Sampler s : {Sampler::Importance, Sampler::Uniform}) {
    const auto ds = sample_world_dataset(TargetField::of(vol), Head::Density, n, s, 17, &g);
    const double expect = static_cast<double>(n) / 64;
    double chi2 = 0;
    for (int c : voxel_counts(ds, r)) chi2 += (c - expect) * (c - expect) / expect;
    EXPECT_LT(chi2, critical);
  }
}

TEST(Sampling, ZeroErrorGridFallsBackToUniform) {
  const ScalarVolume vol(4, 4, 4, 0.5f);
  ErrorGrid g{2, std::vector<double>(8, 0.0)};
  const auto a = sample_world_dataset(TargetField::of(vol), Head::Density, 100, Sampler::Importance, 9, &g);
  const auto b = sample_world_dataset(TargetField::of(vol), Head::Density, 100, Sampler::Uniform, 9);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(a.queries[i].p.y, b.queries[i].p.y);
}

TEST(ErrorGridTest, ExactAndOffsetModels) {
  const auto model = make_model(tiny_config());
  auto own = [&](Vec3 p, float) {
    const ModelQuery q{p, {0, 0, 1}, 0.f};
    return eval_density(model, std::span(&q, 1))[0];
  };
  const auto exact = build_error_grid(model, TargetField{own}, 3, 8, 1);
  EXPECT_EQ(exact.error.size(), 27u);
  for (double e : exact.error) EXPECT_LT(e, 1e-6);
  const auto off = build_error_grid(model, TargetField{[&](Vec3 p, float t) { return own(p, t) - 0.1f; }}, 3, 8, 1);
  for (double e : off.error) EXPECT_NEAR(e, 0.1, 1e-5);
  EXPECT_NEAR(off.total(), 2.7, 1e-3);
}

TEST(TrainWorld, ZeroLearningRateLeavesModel) {
  const auto vol = synth_field("gaussians", 16);
  auto m = make_model(tiny_config());
  const auto before = checkpoint_encode(m);
  auto w = tiny_train(3);
  w.lr = 0.0;
  const auto r = train_world(m, TargetField::of(vol), w);
  EXPECT_EQ(checkpoint_encode(m), before);
  ASSERT_EQ(r.loss.size(), 3u);
  EXPECT_NEAR(r.loss[0], r.loss[2], 1e-9 * r.loss[0]);
}

TEST(TrainWorld, ConstantTargetConverges) {
  const ScalarVolume vol(8, 8, 8, 0.7f);
  auto m = make_model(tiny_config());
  const auto r = train_world(m, TargetField::of(vol), tiny_train(50));
  EXPECT_LT(r.loss.back(), 0.02);
  EXPECT_LT(evaluate_l1(m, TargetField::of(vol), 4096), 0.02);
}

TEST(TrainWorld, DeterministicAndGridIsUsed) {
  const auto vol = synth_field("gaussians", 16);
  auto a = make_model(tiny_config(8));
  auto b = make_model(tiny_config(8));
  auto variance = [](const std::vector<float>& v) {
    double m = 0, s = 0;
    for (float x : v) m += x;
    m /= v.size();
    for (float x : v) s += (x - m) * (x - m);
    return s / v.size();
  };
  const double v0 = variance(a.latent.grids[0].values);
  const auto ra = train_world(a, TargetField::of(vol), tiny_train(8));
  const auto rb = train_world(b, TargetField::of(vol), tiny_train(8));
  EXPECT_EQ(ra.loss, rb.loss);
  EXPECT_GT(variance(a.latent.grids[0].values), v0);
  for (double l : ra.loss) EXPECT_TRUE(std::isfinite(l));
}

TEST(TrainWorld, AdaptivePreservesSampleCount) {
  const auto vol = synth_field("gaussians", 16);
  auto m = make_model(tiny_config());
  auto w = tiny_train(7);
  w.adaptive = true;
  w.resample_interval = 3;
  w.error_grid_resolution = 4;
  std::size_t calls = 0;
  const auto r = train_world(m, TargetField::of(vol), w, [&](int, double) { ++calls; });
  EXPECT_EQ(r.resamples, 2u);
  EXPECT_EQ(calls, 7u);
  // dataset size is fixed by cfg.samples; importance sampling draws exactly that many
  ErrorGrid g = build_error_grid(m, TargetField::of(vol), 4);
  EXPECT_EQ(sample_world_dataset(TargetField::of(vol), Head::Density, w.samples, Sampler::Importance, 1, &g).size(),
            w.samples);
}

TEST(TrainWorld, NonFiniteAbortsWithEpoch) {
  ScalarVolume vol(4, 4, 4, 0.5f);
  auto m = make_model(tiny_config());
  TargetField bad{[](Vec3, float) { return std::nanf(""); }};
  try {
    train_world(m, bad, tiny_train(2));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.epoch, 0);
  }
}

TEST(TrainWorld, ConfigValidation) {
  WorldTrainConfig w;
  w.batch = w.samples + 1;
  EXPECT_THROW(w.validate(), ConfigError);
  const auto j = world_config_to_json(tiny_train(5));
  EXPECT_EQ(world_config_to_json(world_config_from_json(j)), j);
  ModelConfig c = tiny_config();
  c.head = Head::Color;
  c.direction = DirectionEncoding::DirP;
  auto m = make_model(c);
  const ScalarVolume vol(4, 4, 4, 0.5f);
  const TransferFunction tf;
  EXPECT_THROW(train_world(m, TargetField::of(vol, &tf), tiny_train(1)), ConfigError);
}

TEST(TrainScreen, ZeroEpochsAndEncodings) {
  const ScalarVolume vol(8, 8, 8, 0.5f);
  const TransferFunction tf;
  ScreenTrainConfig sc;
  sc.views = 1;
  sc.resolution = 8;
  sc.epochs = 0;
  for (auto enc : {DirectionEncoding::Pos, DirectionEncoding::DirP, DirectionEncoding::DirF}) {
    ModelConfig c = tiny_config();
    c.head = Head::Color;
    c.direction = enc;
    c.fourier_features = 6;
    auto m = make_model(c);
    EXPECT_EQ(m.input_width(), m.mlp.input_width());
    const auto before = checkpoint_encode(m);
    train_screen(m, vol, tf, sc);
    EXPECT_EQ(checkpoint_encode(m), before);
  }
  auto d = make_model(tiny_config());
  EXPECT_THROW(train_screen(d, vol, tf, sc), ConfigError);
}

TEST(TrainScreen, LossDecreasesOnConstantWhiteTarget) {
  const ScalarVolume vol(8, 8, 8, 1.f);
  const TransferFunction tf({{0.f, {1, 1, 1}, 3.f}, {1.f, {1, 1, 1}, 3.f}});
  ModelConfig c = tiny_config();
  c.head = Head::Color;
  auto m = make_model(c);
  ScreenTrainConfig sc;
  sc.views = 1;
  sc.resolution = 12;
  sc.stepsize = 0.05f;
  sc.epochs = 10;
  const auto r = train_screen(m, vol, tf, sc);
  ASSERT_EQ(r.loss.size(), 10u);
  const double first = (r.loss[0] + r.loss[1]) / 2, last = (r.loss[8] + r.loss[9]) / 2;
  EXPECT_LT(last, first);
}

TEST(TrainTemporal, ContractsAndLuVariant) {
  ModelConfig c = tiny_config();
  c.keyframes = {0, 10};
  auto m = make_model(c);
  const auto seq = [](Vec3 p, float t) { return 0.5f + 0.02f * t * p.x; };
  TemporalTrainConfig tc{{0, 5, 15}, tiny_train(1)};
  EXPECT_THROW(train_temporal(m, TargetField{seq}, tc), ConfigError);
  tc.train_steps = {0, 5, 10};
  EXPECT_NO_THROW(train_temporal(m, TargetField{seq}, tc));

  ModelConfig lu = tiny_config();
  lu.keyframes = {0};
  lu.time = TimeEncoding::Direct;
  lu.time_range = std::make_pair(0.0, 10.0);
  auto lm = make_model(lu);
  EXPECT_EQ(lm.latent.grids.size(), 1u);
  EXPECT_NO_THROW(train_temporal(lm, TargetField{seq}, tc));

  auto plain = make_model(tiny_config());
  EXPECT_THROW(train_temporal(plain, TargetField{seq}, tc), ConfigError);
}

TEST(TrainTemporal, StaticSequenceMatchesWorldTraining) {
  const auto vol = synth_field("gaussians", 16);
  ModelConfig c = tiny_config();
  auto world = make_model(c);
  const auto rw = train_world(world, TargetField::of(vol), tiny_train(10));
  c.keyframes = {0, 10};
  auto temporal = make_model(c);
  const auto rt = train_temporal(temporal, TargetField{[&](Vec3 p, float) { return sample_volume(vol, p); }},
                                 TemporalTrainConfig{{0, 10}, tiny_train(10)});
  EXPECT_LT(rt.loss.back(), 2 * rw.loss.back());
  EXPECT_LT(rw.loss.back(), 2 * rt.loss.back());
}

TEST(KeyframeLerp, InterpolatesReferenceVolumes) {
  auto seq = [](int t) { return ScalarVolume(2, 2, 2, 0.1f * t); };
  const auto v = keyframe_lerp_volume(seq, {0, 10}, 5.f);
  for (float x : v.data) EXPECT_NEAR(x, 0.5f, 1e-6);
  EXPECT_NEAR(keyframe_lerp_volume(seq, {0, 10}, 10.f).data[0], 1.f, 1e-6);
}

TEST(EvaluateViews, IdenticalVolumeAndTableShape) {
  const auto vol = synth_field("gaussians", 16);
  EvalSettings e;
  e.views = 3;
  e.resolution = 24;
  const auto m = evaluate_views(vol, vol, tf_ramp(), e);
  ASSERT_EQ(m.views.size(), 3u);
  for (const auto& v : m.views) {
    EXPECT_EQ(v.psnr, 99.0);
    EXPECT_NEAR(v.ssim, 1.0, 1e-12);
  }
  std::ostringstream os;
  write_metrics_csv(os, m);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("mean,"), std::string::npos);

  const auto model = make_model(tiny_config());
  const auto a = evaluate_views(model, vol, tf_ramp(), e), b = evaluate_views(model, vol, tf_ramp(), e);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.views[i].psnr, b.views[i].psnr);
    EXPECT_EQ(a.views[i].ssim, b.views[i].ssim);
  }
}

TEST(ImageL1, LossAndAdjoint) {
  Image a(2, 1, 0.5f), b(2, 1, 0.25f);
  std::vector<float> adj;
  EXPECT_DOUBLE_EQ(image_l1(a, b, &adj), 0.25);
  for (float g : adj) EXPECT_FLOAT_EQ(g, 1.f / 8);
  EXPECT_THROW(image_l1(a, Image(1, 2)), ShapeError);
}

}  // namespace
}  // namespace fvsrn
