// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "fvsrn/common.hpp"

namespace fvsrn {

/// RGBA float image, row-major from the top row. Channel 3 holds accumulated opacity.
struct Image {
  static constexpr int kChannels = 4;

  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, fill) {
    if (w <= 0 || h <= 0) throw ShapeError("image dimensions must be positive");
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float* pixel(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * kChannels; }
  const float* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * kChannels;
  }
};

/// Luminance (Rec. 601 weights) of the rgb channels.
inline std::vector<float> image_luminance(const Image& img) {
  std::vector<float> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float* p = img.data.data() + i * Image::kChannels;
    out[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

/// 2x box downsampling (width and height must be even).
inline Image image_downsample2(const Image& img) {
  if (img.width % 2 || img.height % 2) throw ShapeError("image_downsample2 needs even dimensions");
  Image out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < Image::kChannels; ++c)
        out.pixel(x, y)[c] = 0.25f * (img.pixel(2 * x, 2 * y)[c] + img.pixel(2 * x + 1, 2 * y)[c] +
                                      img.pixel(2 * x, 2 * y + 1)[c] + img.pixel(2 * x + 1, 2 * y + 1)[c]);
  return out;
}

// ---------------------------------------------------------------------------
// PNG (8-bit RGBA) and PFM (float RGB) output
// ---------------------------------------------------------------------------

inline std::string image_encode_png(const Image& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::string out;
  std::vector<unsigned char> rows(img.pixel_count() * 4);
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.f, 1.f) * 255.f));
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * img.width * 4;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void image_write_png(const Image& img, const std::string& path) {
  const std::string bytes = image_encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Little-endian color PFM; rows stored bottom-to-top per the format.
inline void image_write_pfm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = img.pixel(x, y)[c];
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace fvsrn
