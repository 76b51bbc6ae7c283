// Copyright 2026 The kforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kforge/image.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <fstream>
#include <memory>

#include "kforge/error.hpp"

namespace kforge {

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ShapeError("negative raster size");
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Raster Raster::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_) {
    throw ShapeError("crop rectangle outside the image");
  }
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto src = index(x0, y0 + y);
    std::copy_n(pixels_.begin() + static_cast<std::ptrdiff_t>(src), static_cast<std::size_t>(w) * 3,
                out.pixels_.begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
  }
  return out;
}

namespace {

bool is_png(const std::string& head) {
  return head.size() >= 8 && static_cast<unsigned char>(head[0]) == 0x89 && head.substr(1, 3) == "PNG";
}

bool is_jpeg(const std::string& head) {
  return head.size() >= 2 && static_cast<unsigned char>(head[0]) == 0xFF &&
         static_cast<unsigned char>(head[1]) == 0xD8;
}

std::string read_head(const std::string& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open image '" + path + "'");
  std::string head(n, '\0');
  in.read(head.data(), static_cast<std::streamsize>(n));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return head;
}

ImageSize jpeg_dimensions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open image '" + path + "'");
  auto byte = [&]() -> int {
    const int c = in.get();
    if (c == EOF) throw LoadError("truncated JPEG '" + path + "'");
    return c;
  };
  byte();
  byte();
  while (true) {
    int marker = byte();
    while (marker != 0xFF) marker = byte();
    int code = byte();
    while (code == 0xFF) code = byte();
    if (code == 0xD8 || (code >= 0xD0 && code <= 0xD7) || code == 0x01) continue;
    const int length = (byte() << 8) | byte();
    const bool sof = code >= 0xC0 && code <= 0xCF && code != 0xC4 && code != 0xC8 && code != 0xCC;
    if (sof) {
      byte();  // precision
      const int h = (byte() << 8) | byte();
      const int w = (byte() << 8) | byte();
      return {w, h};
    }
    in.seekg(length - 2, std::ios::cur);
    if (!in) throw LoadError("truncated JPEG '" + path + "'");
  }
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void on_jpeg_error(j_common_ptr info) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(info->err);
  std::longjmp(mgr->jump, 1);
}

Raster read_jpeg(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw LoadError("cannot open image '" + path + "'");
  jpeg_decompress_struct info{};
  JpegErrorManager err{};
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw LoadError("cannot decode JPEG '" + path + "'");
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file.get());
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  Raster out(static_cast<int>(info.output_width), static_cast<int>(info.output_height));
  std::vector<std::uint8_t> row(static_cast<std::size_t>(info.output_width) * 3);
  while (info.output_scanline < info.output_height) {
    const int y = static_cast<int>(info.output_scanline);
    JSAMPROW rows[1] = {row.data()};
    jpeg_read_scanlines(&info, rows, 1);
    for (int x = 0; x < out.width(); ++x) {
      out.set(x, y, {row[x * 3], row[x * 3 + 1], row[x * 3 + 2]});
    }
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return out;
}

}  // namespace

ImageSize image_dimensions(const std::string& path) {
  const std::string head = read_head(path, 24);
  if (is_png(head)) {
    if (head.size() < 24) throw LoadError("truncated PNG '" + path + "'");
    auto be32 = [&](std::size_t at) {
      return (static_cast<unsigned char>(head[at]) << 24) | (static_cast<unsigned char>(head[at + 1]) << 16) |
             (static_cast<unsigned char>(head[at + 2]) << 8) | static_cast<unsigned char>(head[at + 3]);
    };
    return {static_cast<int>(be32(16)), static_cast<int>(be32(20))};
  }
  if (is_jpeg(head)) return jpeg_dimensions(path);
  throw LoadError("unsupported image format '" + path + "'");
}

Raster read_image(const std::string& path) {
  const std::string head = read_head(path, 8);
  if (is_jpeg(head)) return read_jpeg(path);
  if (!is_png(head)) throw LoadError("unsupported image format '" + path + "'");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw LoadError("cannot decode PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.bytes().data(), 0, nullptr)) {
    png_image_free(&image);
    throw LoadError("cannot decode PNG '" + path + "': " + image.message);
  }
  return out;
}

void write_png(const std::string& path, const Raster& raster) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width());
  image.height = static_cast<png_uint_32>(raster.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raster.bytes().data(), 0, nullptr)) {
    throw Error("cannot write PNG '" + path + "': " + image.message);
  }
}

std::array<double, 3> sample_bilinear(const Raster& image, double x, double y, Rgb fill) {
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      if (w == 0.0) continue;
      const int px = x0 + dx;
      const int py = y0 + dy;
      const Rgb c = (px >= 0 && py >= 0 && px < image.width() && py < image.height()) ? image.at(px, py) : fill;
      acc[0] += w * c.r;
      acc[1] += w * c.g;
      acc[2] += w * c.b;
    }
  }
  return acc;
}

std::vector<double> gaussian_blur(const std::vector<double>& field, int width, int height, double sigma) {
  if (sigma <= 0.0) throw ShapeError("gaussian_blur needs sigma > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  std::vector<double> tmp(field.size());
  std::vector<double> out(field.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, width - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * field[static_cast<std::size_t>(y) * width + sx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, height - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(sy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

}  // namespace kforge
