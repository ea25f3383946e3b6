// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace fvsrn {
namespace {

std::vector<double> trilinear_oracle(const LatentGrid<float>& g, Vec3 p) {
  double f[3];
  int i0[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(double(p[a]), 0.0, 1.0) * (g.R - 1);
    i0[a] = std::min(int(std::floor(c)), g.R - 2);
    f[a] = c - i0[a];
  }
  std::vector<double> z(g.F, 0.0);
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        const auto v = g.vertex(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        for (int k = 0; k < g.F; ++k) z[k] += w * v[k];
      }
  return z;
}

TEST(GridInit, DeterministicSizeAndMean) {
  const auto a = grid_init(32, 16, 7), b = grid_init(32, 16, 7);
  EXPECT_EQ(a.values.size(), 524288u);
  EXPECT_EQ(a.values, b.values);
  double mean = 0;
  for (float v : a.values) mean += v;
  mean /= a.values.size();
  EXPECT_LT(std::abs(mean), 3 * 0.1 / std::sqrt(double(a.values.size())));
  EXPECT_THROW(LatentGrid<float>(1, 4), ConfigError);
  EXPECT_THROW(LatentGrid<float>(4, 0), ConfigError);
}

TEST(GridSample, ExactAtVerticesAndConstantCell) {
  const auto g = grid_init(5, 3, 1);
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        const auto s = grid_sample(g, {x / 4.f, y / 4.f, z / 4.f});
        const auto v = g.vertex(x, y, z);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(s[k], v[k]);
      }
  LatentGrid<float> c(3, 2);
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] = i % 2 ? 0.25f : -2.f;
  const auto s = grid_sample(c, {0.3f, 0.61f, 0.9f});
  EXPECT_FLOAT_EQ(s[0], -2.f);
  EXPECT_FLOAT_EQ(s[1], 0.25f);
}

TEST(GridSample, MatchesScalarOracle) {
  const auto g = grid_init(6, 4, 2, 1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const auto got = grid_sample(g, p);
    const auto want = trilinear_oracle(g, p);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(got[k], want[k], 1e-6);
  }
}

TEST(GridSample, AffineAlongAxisSegment) {
  const auto g = grid_init(4, 3, 3);
  // Inside cell x in [1/3, 2/3]: three collinear probes.
  const float y = 0.2f, z = 0.8f;
  const auto a = grid_sample(g, {0.4f, y, z}), b = grid_sample(g, {0.5f, y, z}), c = grid_sample(g, {0.6f, y, z});
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(b[k], 0.5f * (a[k] + c[k]), 1e-6);
}

TEST(GridBackward, VertexCenterAndPartitionOfUnity) {
  const LatentGrid<float> g(3, 2);
  const std::vector<float> zbar{1.f, -2.f};
  std::vector<float> grads(g.values.size(), 0.f);
  grid_sample_backward<float>(g, {0.5f, 0.5f, 0.5f}, zbar, grads);
  const std::size_t o = g.vertex_offset(1, 1, 1);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const float want = i == o ? 1.f : i == o + 1 ? -2.f : 0.f;
    EXPECT_EQ(grads[i], want);
  }

  std::fill(grads.begin(), grads.end(), 0.f);
  grid_sample_backward<float>(g, {0.25f, 0.25f, 0.25f}, zbar, grads);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        EXPECT_FLOAT_EQ(grads[g.vertex_offset(x, y, z)], 1.f / 8);
        EXPECT_FLOAT_EQ(grads[g.vertex_offset(x, y, z) + 1], -2.f / 8);
      }

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  const std::vector<float> ones{1.f, 1.f};
  for (int i = 0; i < 20; ++i) {
    std::fill(grads.begin(), grads.end(), 0.f);
    grid_sample_backward<float>(g, {u(rng), u(rng), u(rng)}, ones, grads);
    double s0 = 0, s1 = 0;
    for (std::size_t k = 0; k < grads.size(); k += 2) {
      s0 += grads[k];
      s1 += grads[k + 1];
    }
    EXPECT_NEAR(s0, 1.0, 1e-6);
    EXPECT_NEAR(s1, 1.0, 1e-6);
  }
  std::vector<float> wrong(3);
  EXPECT_THROW(grid_sample_backward<float>(g, {0, 0, 0}, wrong, grads), ShapeError);
}

TEST(Quantize, StatedCodes) {
  LatentGrid<float> g(2, 2);
  // channel 0 spans [-1, 1]; channel 1 is constant
  for (std::size_t v = 0; v < 8; ++v) {
    g.values[v * 2] = v == 0 ? -1.f : v == 1 ? 1.f : 0.f;
    g.values[v * 2 + 1] = 3.5f;
  }
  const auto q = grid_quantize(g);
  EXPECT_EQ(q.codes[0], 0);
  EXPECT_EQ(q.codes[2], 255);
  EXPECT_EQ(q.codes[4], 128);  // 0.5 * 255 = 127.5 rounds away from zero
  for (std::size_t v = 0; v < 8; ++v) EXPECT_EQ(q.codes[v * 2 + 1], 0);
  const auto d = grid_dequantize(q);
  EXPECT_EQ(d.values[0], -1.f);
  for (std::size_t v = 0; v < 8; ++v) EXPECT_EQ(d.values[v * 2 + 1], 3.5f);
}

TEST(Quantize, RoundTripBound) {
  const auto g = grid_init(8, 5, 9, 0.7);
  const auto q = grid_quantize(g);
  const auto d = grid_dequantize(q);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const int f = int(i % 5);
    const double bound = (q.channel_max[f] - q.channel_min[f]) / 510.0 * (1 + 1e-3);
    ASSERT_LE(std::abs(double(d.values[i]) - g.values[i]), bound);
    ASSERT_GE(d.values[i], q.channel_min[f]);
    ASSERT_LE(d.values[i], q.channel_max[f]);
  }
}

KeyframeGrids<float> two_keyframes() {
  KeyframeGrids<float> k;
  k.keys = {0, 10};
  k.grids = {LatentGrid<float>(2, 3), LatentGrid<float>(2, 3)};
  std::fill(k.grids[1].values.begin(), k.grids[1].values.end(), 1.f);
  return k;
}

TEST(Keyframes, InterpolationAndClamp) {
  const auto k = two_keyframes();
  for (float v : keyframe_sample(k, {0.3f, 0.3f, 0.3f}, 5.0)) EXPECT_FLOAT_EQ(v, 0.5f);
  for (float v : keyframe_sample(k, {0.3f, 0.3f, 0.3f}, 25.0)) EXPECT_FLOAT_EQ(v, 1.f);
  for (float v : keyframe_sample(k, {0.3f, 0.3f, 0.3f}, -4.0)) EXPECT_FLOAT_EQ(v, 0.f);
  KeyframeGrids<float> empty;
  EXPECT_THROW(keyframe_sample(empty, {0, 0, 0}, 0.0), ConfigError);
}

TEST(Keyframes, ReproducesGridAndAffineInTime) {
  KeyframeGrids<float> k;
  k.keys = {0, 4, 9};
  for (int i = 0; i < 3; ++i) k.grids.push_back(grid_init(4, 2, 100 + i));
  k.validate();
  const Vec3 p{0.1f, 0.7f, 0.45f};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(keyframe_sample(k, p, k.keys[i]), grid_sample(k.grids[i], p));
  const auto a = keyframe_sample(k, p, 5.0), b = keyframe_sample(k, p, 6.5), c = keyframe_sample(k, p, 8.0);
  for (int f = 0; f < 2; ++f) EXPECT_NEAR(b[f], 0.5f * (a[f] + c[f]), 1e-6);
  k.keys = {0, 4, 4};
  EXPECT_THROW(k.validate(), ConfigError);
}

}  // namespace
}  // namespace fvsrn
