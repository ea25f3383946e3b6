// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "fvsrn/common.hpp"

namespace fvsrn {

/// Dense scalar field on a voxel lattice spanning the unit cube. Voxel (i,j,k)
/// sits at (i/(X-1), j/(Y-1), k/(Z-1)); data is x-fastest.
struct ScalarVolume {
  std::array<int, 3> dims{0, 0, 0};
  std::vector<float> data;
  /// Affine map back to the stored units: raw = value_offset + value_scale * v.
  double value_offset = 0.0;
  double value_scale = 1.0;

  ScalarVolume() = default;
  ScalarVolume(int x, int y, int z, float fill = 0.f)
      : dims{x, y, z}, data(static_cast<std::size_t>(x) * y * z, fill) {
    if (x <= 0 || y <= 0 || z <= 0) throw ShapeError("volume dimensions must be positive");
  }

  std::size_t size() const { return data.size(); }
  int max_dim() const { return std::max({dims[0], dims[1], dims[2]}); }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  }
  float& at(int x, int y, int z) { return data[index(x, y, z)]; }
  float at(int x, int y, int z) const { return data[index(x, y, z)]; }
  Vec3 voxel_position(int x, int y, int z) const {
    auto coord = [](int i, int n) { return n > 1 ? static_cast<float>(i) / static_cast<float>(n - 1) : 0.f; };
    return {coord(x, dims[0]), coord(y, dims[1]), coord(z, dims[2])};
  }
};

enum class VoxelType : std::uint8_t { U8 = 0, F32 = 1 };

// ---------------------------------------------------------------------------
// .vraw I/O
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kVolumeMagic[4] = {'F', 'V', 'S', 'V'};
inline constexpr std::size_t kVolumeHeaderBytes = 24;

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void write_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = read_u32_le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}
inline void write_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32_le(out, bits);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

/// Decodes a .vraw byte buffer. u8 samples map to v/255. f32 samples are
/// min-max normalized when any value lies outside [0,1]; payloads already in
/// the unit range are kept as-is (identity map).
inline ScalarVolume volume_decode(std::string_view bytes) {
  using detail::read_u32_le;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(p, detail::kVolumeMagic, 4) != 0)
    throw FormatError("bad magic, expected 'FVSV'", 0);
  if (bytes.size() < detail::kVolumeHeaderBytes)
    throw FormatError("truncated header", bytes.size());
  if (read_u32_le(p + 4) != 1) throw FormatError("unsupported version", 4);
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = read_u32_le(p + 8 + 4 * a);
    if (d == 0) throw FormatError("zero dimension", 8 + 4 * static_cast<std::size_t>(a));
    if (d > (1u << 16)) throw FormatError("dimension too large", 8 + 4 * static_cast<std::size_t>(a));
    dims[a] = static_cast<int>(d);
  }
  const std::uint8_t dtype = p[20];
  if (dtype > 1) throw FormatError("unknown dtype", 20);
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  const std::size_t sample_bytes = dtype == 0 ? 1 : 4;
  const std::size_t need = detail::kVolumeHeaderBytes + count * sample_bytes;
  if (bytes.size() < need) throw FormatError("truncated payload", bytes.size());

  ScalarVolume vol(dims[0], dims[1], dims[2]);
  const unsigned char* payload = p + detail::kVolumeHeaderBytes;
  if (dtype == 0) {
    for (std::size_t i = 0; i < count; ++i) vol.data[i] = static_cast<float>(payload[i]) / 255.f;
    vol.value_scale = 255.0;
    return vol;
  }
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (std::size_t i = 0; i < count; ++i) {
    const float v = detail::read_f32_le(payload + 4 * i);
    if (!std::isfinite(v))
      throw FormatError("non-finite sample", detail::kVolumeHeaderBytes + 4 * i);
    vol.data[i] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo < 0.f || hi > 1.f) {
    const double range = static_cast<double>(hi) - lo;
    vol.value_offset = lo;
    vol.value_scale = range > 0 ? range : 1.0;
    for (auto& v : vol.data)
      v = range > 0 ? static_cast<float>((static_cast<double>(v) - lo) / range) : 0.f;
  }
  return vol;
}

inline ScalarVolume volume_read(const std::string& path) {
  return volume_decode(detail::read_file(path));
}

inline std::string volume_encode(const ScalarVolume& vol, VoxelType dtype) {
  std::string out(detail::kVolumeMagic, 4);
  detail::write_u32_le(out, 1);
  for (int a = 0; a < 3; ++a) detail::write_u32_le(out, static_cast<std::uint32_t>(vol.dims[a]));
  out.push_back(static_cast<char>(dtype));
  out.append(3, '\0');
  out.reserve(out.size() + vol.size() * (dtype == VoxelType::U8 ? 1 : 4));
  for (float v : vol.data) {
    if (dtype == VoxelType::U8)
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f))));
    else
      detail::write_f32_le(out, v);
  }
  return out;
}

inline void volume_write(const ScalarVolume& vol, const std::string& path, VoxelType dtype) {
  detail::write_file(path, volume_encode(vol, dtype));
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Trilinear interpolation with edge clamping; exact at voxel positions.
inline float sample_volume(const ScalarVolume& vol, Vec3 p) {
  int i0[3], i1[3];
  float f[3];
  for (int a = 0; a < 3; ++a) {
    const int n = vol.dims[a];
    if (n == 1) {
      i0[a] = i1[a] = 0;
      f[a] = 0.f;
      continue;
    }
    float x = std::clamp(p[a], 0.f, 1.f) * static_cast<float>(n - 1);
    // i / (n - 1) * (n - 1) may round off an integer; snap so voxel positions are exact.
    const float r = std::round(x);
    if (std::abs(x - r) <= 1e-6f * static_cast<float>(n)) x = r;
    int i = static_cast<int>(std::floor(x));
    i = std::clamp(i, 0, n - 2);
    i0[a] = i;
    i1[a] = i + 1;
    f[a] = x - static_cast<float>(i);
  }
  const float c000 = vol.at(i0[0], i0[1], i0[2]), c100 = vol.at(i1[0], i0[1], i0[2]);
  const float c010 = vol.at(i0[0], i1[1], i0[2]), c110 = vol.at(i1[0], i1[1], i0[2]);
  const float c001 = vol.at(i0[0], i0[1], i1[2]), c101 = vol.at(i1[0], i0[1], i1[2]);
  const float c011 = vol.at(i0[0], i1[1], i1[2]), c111 = vol.at(i1[0], i1[1], i1[2]);
  // std::lerp is exact at f = 0 and f = 1
  const float c00 = std::lerp(c000, c100, f[0]), c10 = std::lerp(c010, c110, f[0]);
  const float c01 = std::lerp(c001, c101, f[0]), c11 = std::lerp(c011, c111, f[0]);
  return std::lerp(std::lerp(c00, c10, f[1]), std::lerp(c01, c11, f[1]), f[2]);
}

// ---------------------------------------------------------------------------
// Synthetic fields
// ---------------------------------------------------------------------------

enum class SynthKind { Sphere, Gaussians, MarschnerLobb, MovingBlobs };

inline SynthKind synth_kind_from_string(std::string_view s) {
  if (s == "sphere") return SynthKind::Sphere;
  if (s == "gaussians") return SynthKind::Gaussians;
  if (s == "marschner_lobb") return SynthKind::MarschnerLobb;
  if (s == "moving_blobs") return SynthKind::MovingBlobs;
  throw ConfigError("unknown synthetic field kind '" + std::string(s) + "'");
}

inline const char* to_string(SynthKind k) {
  switch (k) {
    case SynthKind::Sphere: return "sphere";
    case SynthKind::Gaussians: return "gaussians";
    case SynthKind::MarschnerLobb: return "marschner_lobb";
    case SynthKind::MovingBlobs: return "moving_blobs";
  }
  return "?";
}

struct SynthParams {
  // sphere
  Vec3 center{0.5f, 0.5f, 0.5f};
  float radius = 0.25f;
  float falloff = 0.05f;  ///< half-width of the smooth boundary band
  // gaussians / moving_blobs
  int components = 16;
  std::uint64_t seed = 1;
  float min_sigma = 0.03f;
  float max_sigma = 0.10f;
  // moving_blobs
  float blob_sigma = 0.06f;
  float speed = 0.015f;  ///< distance travelled per unit time
  float time_center = 10.f;  ///< time at which blobs sit at their base positions
  // marschner_lobb
  float ml_frequency = 6.f;
  float ml_alpha = 0.25f;
};

/// Blob trajectory of the moving_blobs field: center(t) = base + velocity * (t - time_center).
struct Blob {
  Vec3 base;
  Vec3 velocity;
  float sigma;
  float amplitude;
};

inline std::vector<Blob> moving_blobs_layout(const SynthParams& prm) {
  std::mt19937_64 rng(prm.seed);
  std::uniform_real_distribution<float> pos(0.35f, 0.65f);
  std::uniform_real_distribution<float> angle(0.f, 1.f);
  std::uniform_real_distribution<float> amp(0.7f, 1.f);
  std::vector<Blob> blobs;
  for (int k = 0; k < prm.components; ++k) {
    Blob b;
    b.base = {pos(rng), pos(rng), pos(rng)};
    const float u = 2.f * angle(rng) - 1.f;
    const float phi = 2.f * static_cast<float>(kPi) * angle(rng);
    const float s = std::sqrt(std::max(0.f, 1.f - u * u));
    b.velocity = Vec3{s * std::cos(phi), s * std::sin(phi), u} * prm.speed;
    b.sigma = prm.blob_sigma;
    b.amplitude = amp(rng);
    blobs.push_back(b);
  }
  return blobs;
}

struct GaussianComponent {
  Vec3 center;
  float sigma;
  float amplitude;
};

inline std::vector<GaussianComponent> gaussians_layout(const SynthParams& prm) {
  std::mt19937_64 rng(prm.seed);
  std::uniform_real_distribution<float> pos(0.15f, 0.85f);
  std::uniform_real_distribution<float> sig(prm.min_sigma, prm.max_sigma);
  std::uniform_real_distribution<float> amp(0.4f, 1.f);
  std::vector<GaussianComponent> out;
  for (int k = 0; k < prm.components; ++k) {
    GaussianComponent g;
    g.center = {pos(rng), pos(rng), pos(rng)};
    g.sigma = sig(rng);
    g.amplitude = amp(rng);
    out.push_back(g);
  }
  return out;
}

/// Continuous field value at p in [0,1]^3; time is used by moving_blobs only.
class SyntheticField {
 public:
  SyntheticField(SynthKind kind, SynthParams params, float t = 0.f)
      : kind_(kind), prm_(params), t_(t) {
    if (kind_ == SynthKind::Gaussians) gaussians_ = gaussians_layout(prm_);
    if (kind_ == SynthKind::MovingBlobs) blobs_ = moving_blobs_layout(prm_);
  }

  float operator()(Vec3 p) const {
    switch (kind_) {
      case SynthKind::Sphere: {
        const float d = length(p - prm_.center) - prm_.radius;
        const float w = std::max(prm_.falloff, 1e-6f);
        const float s = std::clamp((d + w) / (2.f * w), 0.f, 1.f);
        return 1.f - s * s * (3.f - 2.f * s);
      }
      case SynthKind::Gaussians: {
        float v = 0.f;
        for (const auto& g : gaussians_) {
          const Vec3 d = p - g.center;
          v += g.amplitude * std::exp(-dot(d, d) / (2.f * g.sigma * g.sigma));
        }
        return std::clamp(v, 0.f, 1.f);
      }
      case SynthKind::MarschnerLobb: {
        const double x = 2.0 * p.x - 1.0, y = 2.0 * p.y - 1.0, z = 2.0 * p.z - 1.0;
        const double r = std::sqrt(x * x + y * y);
        const double rho_r = std::cos(2.0 * kPi * prm_.ml_frequency * std::cos(kPi * r / 2.0));
        const double a = prm_.ml_alpha;
        const double v = (1.0 - std::sin(kPi * z / 2.0) + a * (1.0 + rho_r)) / (2.0 * (1.0 + a));
        return static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      case SynthKind::MovingBlobs: {
        float v = 0.f;
        for (const auto& b : blobs_) {
          const Vec3 c = b.base + b.velocity * (t_ - prm_.time_center);
          const Vec3 d = p - c;
          v += b.amplitude * std::exp(-dot(d, d) / (2.f * b.sigma * b.sigma));
        }
        return std::clamp(v, 0.f, 1.f);
      }
    }
    return 0.f;
  }

 private:
  SynthKind kind_;
  SynthParams prm_;
  float t_;
  std::vector<GaussianComponent> gaussians_;
  std::vector<Blob> blobs_;
};

inline ScalarVolume synth_field(SynthKind kind, int resolution, const SynthParams& params = {},
                                std::optional<float> t = std::nullopt) {
  if (resolution < 2) throw ConfigError("synthetic resolution must be >= 2");
  const SyntheticField field(kind, params, t.value_or(params.time_center));
  ScalarVolume vol(resolution, resolution, resolution);
  for (int z = 0; z < resolution; ++z)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) vol.at(x, y, z) = field(vol.voxel_position(x, y, z));
  return vol;
}

inline ScalarVolume synth_field(std::string_view kind, int resolution, const SynthParams& params = {},
                                std::optional<float> t = std::nullopt) {
  return synth_field(synth_kind_from_string(kind), resolution, params, t);
}

// ---------------------------------------------------------------------------
// Low-pass baseline
// ---------------------------------------------------------------------------

/// Edge length of the dense density grid holding as many values as an R^3 x F latent grid.
inline int equal_memory_resolution(int grid_resolution, int grid_features) {
  const double values = std::pow(static_cast<double>(grid_resolution), 3.0) * grid_features;
  return static_cast<int>(std::floor(std::cbrt(values) + 1e-9));
}

namespace detail {

// Separable Gaussian blur along one axis. Computes c + sum w_i (v_i - c) with c
// the center sample so constant regions come out bit-exact.
inline void blur_axis(ScalarVolume& vol, int axis, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * static_cast<std::size_t>(radius) + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += w[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& x : w) x /= sum;
  const ScalarVolume src = vol;
  const int n = vol.dims[axis];
  for (int z = 0; z < vol.dims[2]; ++z)
    for (int y = 0; y < vol.dims[1]; ++y)
      for (int x = 0; x < vol.dims[0]; ++x) {
        int c[3] = {x, y, z};
        const float center = src.at(x, y, z);
        double acc = 0;
        const int base = c[axis];
        for (int i = -radius; i <= radius; ++i) {
          c[axis] = std::clamp(base + i, 0, n - 1);
          acc += w[i + radius] * (static_cast<double>(src.at(c[0], c[1], c[2])) - center);
        }
        vol.at(x, y, z) = static_cast<float>(center + acc);
      }
}

}  // namespace detail

/// Gaussian low-pass (sigma = half the subsampling factor, in source voxels)
/// followed by trilinear resampling so the longest axis has target_res voxels.
inline ScalarVolume lowpass_downsample(const ScalarVolume& vol, int target_res) {
  const int maxd = vol.max_dim();
  if (target_res < 2 || target_res > maxd)
    throw ConfigError("lowpass_downsample: target resolution " + std::to_string(target_res) +
                      " outside [2, " + std::to_string(maxd) + "]");
  ScalarVolume blurred = vol;
  const double factor = static_cast<double>(maxd - 1) / (target_res - 1);
  if (factor > 1.0) {
    const double sigma = 0.5 * factor;
    for (int a = 0; a < 3; ++a)
      if (vol.dims[a] > 1) detail::blur_axis(blurred, a, sigma);
  }
  std::array<int, 3> out_dims{};
  for (int a = 0; a < 3; ++a)
    out_dims[a] = std::max(1, static_cast<int>(std::lround(static_cast<double>(vol.dims[a]) * target_res / maxd)));
  ScalarVolume out(out_dims[0], out_dims[1], out_dims[2]);
  out.value_offset = vol.value_offset;
  out.value_scale = vol.value_scale;
  for (int z = 0; z < out_dims[2]; ++z)
    for (int y = 0; y < out_dims[1]; ++y)
      for (int x = 0; x < out_dims[0]; ++x) out.at(x, y, z) = sample_volume(blurred, out.voxel_position(x, y, z));
  return out;
}

/// Trilinear resampling onto a new lattice without filtering.
inline ScalarVolume resample_volume(const ScalarVolume& vol, int res) {
  ScalarVolume out(res, res, res);
  for (int z = 0; z < res; ++z)
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) out.at(x, y, z) = sample_volume(vol, out.voxel_position(x, y, z));
  return out;
}

}  // namespace fvsrn
