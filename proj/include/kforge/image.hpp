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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace kforge {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit interleaved RGB image, row-major, origin at the top-left.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const auto i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }
  std::uint8_t channel(int x, int y, int c) const { return pixels_[index(x, y) + c]; }

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  /// Copy of the rectangle [x0,x0+w)×[y0,y0+h); the rectangle must lie inside the image.
  Raster crop(int x0, int y0, int w, int h) const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Reads width/height from a PNG or JPEG header without decoding pixels.
ImageSize image_dimensions(const std::string& path);
/// Decodes PNG (any bit depth/colour type, flattened to RGB8) or baseline JPEG.
Raster read_image(const std::string& path);
/// Writes an RGB8 PNG with fixed compression settings, so identical rasters give identical bytes.
void write_png(const std::string& path, const Raster& image);

/// Bilinear sample at continuous pixel coordinates (pixel centres at integer + 0.5).
/// Samples falling outside the image take the fill colour.
std::array<double, 3> sample_bilinear(const Raster& image, double x, double y, Rgb fill);

/// Separable Gaussian blur of a scalar field with replicated borders; radius is ceil(3 sigma).
std::vector<double> gaussian_blur(const std::vector<double>& field, int width, int height, double sigma);

}  // namespace kforge
