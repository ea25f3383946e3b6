// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "fvsrn/common.hpp"
#include "fvsrn/image.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

/// PSNR cap reported for identical inputs.
inline constexpr double kPsnrCap = 99.0;

inline double mean_squared_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("metric inputs must have the same non-zero size");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10 log10(1 / MSE) with unit peak, capped at kPsnrCap.
inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

/// PSNR over all four channels (rgb + opacity).
inline double metric_psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("psnr: image shapes differ");
  return psnr_from_mse(mean_squared_error(a.data, b.data));
}

inline double metric_psnr(const ScalarVolume& a, const ScalarVolume& b) {
  if (a.dims != b.dims) throw ShapeError("psnr: volume shapes differ");
  return psnr_from_mse(mean_squared_error(a.data, b.data));
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

// Separable Gaussian filter, "valid" region only.
inline std::vector<double> gaussian_filter_valid(const std::vector<double>& img, int w, int h,
                                                 const std::vector<double>& kernel) {
  const int k = static_cast<int>(kernel.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += kernel[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM of two grayscale rasters.
inline double ssim_gray(std::span<const float> a, std::span<const float> b, int width, int height,
                        const SsimOptions& opt = {}) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height)
    throw ShapeError("ssim: raster shapes differ");
  if (width < opt.window || height < opt.window) throw ShapeError("ssim: image smaller than the window");
  std::vector<double> kernel(static_cast<std::size_t>(opt.window));
  double sum = 0;
  const int half = opt.window / 2;
  for (int i = 0; i < opt.window; ++i)
    sum += kernel[i] = std::exp(-0.5 * (i - half) * (i - half) / (opt.sigma * opt.sigma));
  for (auto& v : kernel) v /= sum;

  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = detail::gaussian_filter_valid(x, width, height, kernel);
  const auto my = detail::gaussian_filter_valid(y, width, height, kernel);
  const auto sxx = detail::gaussian_filter_valid(xx, width, height, kernel);
  const auto syy = detail::gaussian_filter_valid(yy, width, height, kernel);
  const auto sxy = detail::gaussian_filter_valid(xy, width, height, kernel);

  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

/// Mean SSIM on the luminance of the rgb channels.
inline double metric_ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("ssim: image shapes differ");
  const auto la = image_luminance(a);
  const auto lb = image_luminance(b);
  return ssim_gray(la, lb, a.width, a.height, opt);
}

}  // namespace fvsrn
