// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fvsrn {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
struct FormatError : Error {
  FormatError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

struct IoError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct CapacityError : Error {
  using Error::Error;
};

/// Raised when a gradient, loss or adjoint stops being finite.
struct NumericError : Error {
  NumericError(const std::string& what, long epoch_index = -1)
      : Error(epoch_index >= 0 ? what + " (epoch " + std::to_string(epoch_index) + ")" : what),
        epoch(epoch_index) {}
  long epoch;
};

// ---------------------------------------------------------------------------
// Small vector type for positions, directions and colors.
// ---------------------------------------------------------------------------

struct Vec3 {
  float x = 0.f, y = 0.f, z = 0.f;

  constexpr float& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(Vec3 a, float s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(float s, Vec3 a) { return a * s; }
  friend constexpr Vec3 operator*(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
  constexpr Vec3& operator+=(Vec3 b) { x += b.x; y += b.y; z += b.z; return *this; }
};

constexpr float dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float length(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(Vec3 a) {
  const float l = length(a);
  return l > 0.f ? a * (1.f / l) : a;
}
inline Vec3 clamp01(Vec3 p) {
  return {std::clamp(p.x, 0.f, 1.f), std::clamp(p.y, 0.f, 1.f), std::clamp(p.z, 0.f, 1.f)};
}
inline bool isfinite(Vec3 a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// ---------------------------------------------------------------------------
// Dense row-major matrix used for batches (rows = samples).
// ---------------------------------------------------------------------------

template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.resize(r * c);
  }
  T* row(std::size_t r) { return data.data() + r * cols; }
  const T* row(std::size_t r) const { return data.data() + r * cols; }
  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

/// Default worker count: FVSRN_THREADS if set, otherwise the hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("FVSRN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Splits [0, n) into `workers` contiguous ranges and calls fn(begin, end, worker).
/// Range boundaries depend only on (n, workers), so results reduced in worker
/// order are reproducible for a fixed worker count.
inline void parallel_ranges(std::size_t n, int workers,
                            const std::function<void(std::size_t, std::size_t, int)>& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = n * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
    const std::size_t end = n * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
    pool.emplace_back([&, begin, end, w] {
      try {
        fn(begin, end, w);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fvsrn
