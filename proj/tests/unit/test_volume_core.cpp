// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace fvsrn {
namespace {

using test::raw_header;

TEST(VolumeRead, U8AllMaxIsOne) {
  std::string bytes = raw_header("FVSV", 2, 2, 2, 0) + std::string(8, static_cast<char>(255));
  const auto v = volume_decode(bytes);
  ASSERT_EQ(v.dims, (std::array<int, 3>{2, 2, 2}));
  for (float x : v.data) EXPECT_EQ(x, 1.f);
}

TEST(VolumeRead, BadMagicReportsOffsetZero) {
  std::string bytes = raw_header("XXXX", 2, 2, 2, 0) + std::string(8, '\0');
  try {
    volume_decode(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset, 0u);
  }
}

TEST(VolumeRead, TruncatedAndZeroDimension) {
  EXPECT_THROW(volume_decode(raw_header("FVSV", 2, 2, 2, 0) + std::string(7, '\0')), FormatError);
  try {
    volume_decode(raw_header("FVSV", 2, 0, 2, 0));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset, 12u);
  }
}

TEST(VolumeRead, F32MinMaxNormalized) {
  std::string bytes = raw_header("FVSV", 4, 4, 4, 1);
  for (int i = 0; i < 64; ++i) {
    const float f = static_cast<float>(i);
    bytes.append(reinterpret_cast<const char*>(&f), 4);
  }
  const auto v = volume_decode(bytes);
  // affine map (v - 0) / 63
  EXPECT_EQ(v.data[0], 0.f);
  EXPECT_EQ(v.data[63], 1.f);
  EXPECT_NEAR(v.data[21], 21.f / 63.f, 1e-7);
  EXPECT_DOUBLE_EQ(v.value_offset, 0.0);
  EXPECT_DOUBLE_EQ(v.value_scale, 63.0);
}

TEST(VolumeWrite, F32RoundTripBitIdentical) {
  const auto dir = test::temp_dir("vol_f32");
  const auto v = test::random_volume(9, 3);
  volume_write(v, (dir / "a.vraw").string(), VoxelType::F32);
  const auto r = volume_read((dir / "a.vraw").string());
  ASSERT_EQ(r.data.size(), v.data.size());
  EXPECT_EQ(std::memcmp(r.data.data(), v.data.data(), v.data.size() * 4), 0);
}

TEST(VolumeWrite, U8QuantizerBound) {
  const auto dir = test::temp_dir("vol_u8");
  const auto v = test::random_volume(10, 4);
  volume_write(v, (dir / "a.vraw").string(), VoxelType::U8);
  const auto r = volume_read((dir / "a.vraw").string());
  double worst = 0;
  for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(double(r.data[i]) - v.data[i]));
  EXPECT_LE(worst, 1.0 / 255.0 + 1e-6);
}

TEST(VolumeWrite, UnwritablePathIsIoError) {
  EXPECT_THROW(volume_write(ScalarVolume(2, 2, 2), "/nonexistent_dir/x/y.vraw", VoxelType::F32), IoError);
}

TEST(Synth, SphereCenterIsOne) {
  SynthParams p;
  EXPECT_EQ(SyntheticField(SynthKind::Sphere, p)({0.5f, 0.5f, 0.5f}), 1.f);
  const auto v = synth_field("sphere", 33);
  EXPECT_EQ(v.at(16, 16, 16), 1.f);
  EXPECT_EQ(v.at(0, 0, 0), 0.f);
}

TEST(Synth, ZeroGaussiansIsZero) {
  SynthParams p;
  p.components = 0;
  for (float x : synth_field("gaussians", 8, p).data) EXPECT_EQ(x, 0.f);
}

TEST(Synth, DeterministicAndBounded) {
  for (auto kind : {"sphere", "gaussians", "marschner_lobb", "moving_blobs"}) {
    const auto a = synth_field(kind, 12), b = synth_field(kind, 12);
    EXPECT_EQ(a.data, b.data) << kind;
    for (float x : a.data) ASSERT_TRUE(x >= 0.f && x <= 1.f) << kind;
  }
  EXPECT_THROW(synth_field("torus", 8), ConfigError);
  EXPECT_THROW(synth_field("sphere", 1), ConfigError);
}

TEST(Synth, MovingBlobCentroidFollowsVelocity) {
  SynthParams p;
  p.components = 1;
  const int n = 64;
  const auto blob = moving_blobs_layout(p).front();
  auto centroid = [&](float t) {
    const auto v = synth_field(SynthKind::MovingBlobs, n, p, t);
    Vec3 c{};
    double m = 0;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const double w = v.at(x, y, z);
          c = c + v.voxel_position(x, y, z) * static_cast<float>(w);
          m += w;
        }
    return c * static_cast<float>(1.0 / m);
  };
  const float t0 = 6.f, dt = 8.f;
  const Vec3 shift = centroid(t0 + dt) - centroid(t0);
  const Vec3 expect = blob.velocity * dt;
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(shift[a], expect[a], 1.0 / (n - 1));
}

// Scalar trilinear oracle over the i/(n-1) lattice.
float trilinear_oracle(const ScalarVolume& v, Vec3 p) {
  double f[3];
  int i0[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(static_cast<double>(p[a]), 0.0, 1.0) * (v.dims[a] - 1);
    i0[a] = std::min(static_cast<int>(std::floor(c)), v.dims[a] - 2);
    f[a] = c - i0[a];
  }
  double acc = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        acc += w * v.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
      }
  return static_cast<float>(acc);
}

TEST(SampleVolume, MatchesScalarOracle) {
  const auto v = test::random_volume(7, 11);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    EXPECT_NEAR(sample_volume(v, p), trilinear_oracle(v, p), 1e-6);
  }
}

TEST(SampleVolume, ExactAtCentersAndConstant) {
  const auto v = test::random_volume(6, 12);
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(sample_volume(v, v.voxel_position(x, y, z)), v.at(x, y, z));
  ScalarVolume c(5, 5, 5, 0.37f);
  EXPECT_FLOAT_EQ(sample_volume(c, {0.123f, 0.9f, 0.5f}), 0.37f);
  EXPECT_FLOAT_EQ(sample_volume(c, {-3.f, 7.f, 0.5f}), 0.37f);
}

TEST(SampleVolume, LinearAlongAxis) {
  const auto v = test::random_volume(5, 13);
  const float a = v.at(1, 2, 3), b = v.at(2, 2, 3);
  for (float s : {0.1f, 0.25f, 0.5f, 0.9f}) {
    const Vec3 p{(1.f + s) / 4.f, 2.f / 4.f, 3.f / 4.f};
    EXPECT_NEAR(sample_volume(v, p), a + s * (b - a), 1e-6);
  }
}

TEST(Lowpass, EqualMemoryResolution) {
  EXPECT_EQ(equal_memory_resolution(32, 16), 80);  // cbrt(524288) = 80.63
  EXPECT_NEAR(std::cbrt(32.0 * 32 * 32 * 16), 81.0, 0.5);
}

TEST(Lowpass, ConstantPreservedAndImpulseSpread) {
  ScalarVolume c(20, 20, 20, 0.42f);
  const auto d = lowpass_downsample(c, 8);
  EXPECT_EQ(d.dims, (std::array<int, 3>{8, 8, 8}));
  for (float x : d.data) EXPECT_EQ(x, 0.42f);

  ScalarVolume imp(17, 17, 17);
  imp.at(8, 8, 8) = 1.f;
  const auto s = lowpass_downsample(imp, 9);
  const float mx = *std::max_element(s.data.begin(), s.data.end());
  EXPECT_LT(mx, 1.f);
  EXPECT_GT(mx, 0.f);
  EXPECT_THROW(lowpass_downsample(imp, 18), ConfigError);
  EXPECT_THROW(lowpass_downsample(imp, 1), ConfigError);
}

TEST(TransferFunction, ControlPointsMidpointAndClamp) {
  TransferFunction tf({{0.f, {0, 0, 0}, 0.f}, {1.f, {1, 1, 1}, 10.f}});
  const auto m = tf_eval(tf, 0.5f);
  for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(m.rgb[c], 0.5f);
  EXPECT_FLOAT_EQ(m.sigma, 5.f);
  EXPECT_EQ(tf_eval(tf, -0.1f).sigma, tf_eval(tf, 0.f).sigma);
  EXPECT_EQ(tf_eval(tf, 1.f).sigma, 10.f);

  const auto two = tf_two_peaks();
  for (const auto& p : two.points()) {
    const auto s = two(p.x);
    EXPECT_FLOAT_EQ(s.sigma, p.sigma);
    for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(s.rgb[c], p.rgb[c]);
  }
}

TEST(TransferFunction, LipschitzContinuity) {
  const auto tf = tf_two_peaks();
  const float L = tf.lipschitz(), eps = 1e-3f;
  for (int i = 0; i <= 1000; ++i) {
    const float x = i / 1000.f;
    const auto a = tf(x), b = tf(x + eps);
    EXPECT_LE(std::abs(a.sigma - b.sigma), L * eps * 1.001f + 1e-5f);
    for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(a.rgb[c] - b.rgb[c]), L * eps * 1.001f + 1e-6f);
  }
}

TEST(TransferFunction, JsonRoundTrip) {
  const auto tf = tf_heat();
  const auto back = tf_from_json(tf_to_json(tf));
  ASSERT_EQ(back.points().size(), tf.points().size());
  for (float x : {0.f, 0.3f, 0.77f, 1.f}) EXPECT_FLOAT_EQ(back(x).sigma, tf(x).sigma);
  EXPECT_THROW(tf_from_json(nlohmann::json::parse(R"([{"x":0.5,"rgb":[0,0,0],"sigma":1}])")), ConfigError);
}

TEST(Metrics, PsnrCapsAndUnitError) {
  const auto a = test::random_image(16, 16, 1);
  EXPECT_EQ(metric_psnr(a, a), 99.0);
  Image zero(8, 8, 0.f), one(8, 8, 1.f);
  EXPECT_DOUBLE_EQ(metric_psnr(zero, one), 0.0);
  EXPECT_THROW(metric_psnr(zero, Image(8, 9)), ShapeError);
}

TEST(Metrics, PsnrMatchesScalarOracleAndSymmetric) {
  const auto a = test::random_volume(8, 1), b = test::random_volume(8, 2);
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (double(a.data[i]) - b.data[i]) * (double(a.data[i]) - b.data[i]);
  const double oracle = 10.0 * std::log10(1.0 / (se / a.size()));
  EXPECT_NEAR(metric_psnr(a, b), oracle, 1e-6);
  EXPECT_EQ(metric_psnr(a, b), metric_psnr(b, a));
}

TEST(Metrics, SsimProperties) {
  const auto a = test::random_image(32, 32, 3), b = test::random_image(32, 32, 4);
  EXPECT_NEAR(metric_ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(metric_ssim(a, b), metric_ssim(b, a), 1e-12);

  Image bright(32, 32, 0.9f), dark(32, 32, 0.1f);
  EXPECT_LT(metric_ssim(bright, dark), 1.0);

  Image c(32, 32, 0.5f);
  auto noisy = c;
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n(0.f, 1e-3f);
  for (auto& x : noisy.data) x += n(rng);
  EXPECT_GT(metric_ssim(c, noisy), 0.95);
  EXPECT_THROW(metric_ssim(Image(8, 8), Image(8, 8)), ShapeError);
  EXPECT_THROW(metric_ssim(Image(16, 16), Image(16, 17)), ShapeError);
}

TEST(Camera, RaysAreUnitAndCentered) {
  Camera cam;
  cam.width = cam.height = 3;
  const auto rays = camera_rays(cam);
  for (const auto& r : rays) EXPECT_NEAR(length(r.direction), 1.f, 1e-6);
  const Vec3 mid = rays[4].direction;
  EXPECT_NEAR(mid.z, -1.f, 1e-6);
  cam.target = cam.eye;
  EXPECT_THROW(camera_rays(cam), ConfigError);
  for (const auto& c : orbit_cameras(10, 8, 8, 2.f)) EXPECT_NEAR(length(c.eye - Vec3{0.5f, 0.5f, 0.5f}), 2.f, 1e-5);
}

}  // namespace
}  // namespace fvsrn
