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

#include "kforge/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"

namespace kforge::aug {

void AugmentationSpec::validate() const {
  if (k_min < 0 || k_max < k_min) throw ConfigError("augmentation: need 0 <= k_min <= k_max");
  if (erase_margin < 0) throw ConfigError("augmentation: erase_margin must be >= 0");
  if (!(skew_max_deg >= 0.0 && skew_max_deg <= 30.0)) throw ConfigError("augmentation: skew_max_deg must be in [0, 30]");
  if (!(elastic_alpha >= 0.0)) throw ConfigError("augmentation: elastic_alpha must be >= 0");
  if (!(elastic_sigma > 0.0)) throw ConfigError("augmentation: elastic_sigma must be > 0");
}

AugRecord make_record(const Raster& image, const PageAnnotation& page, const CodepointMap& map,
                      const LineAssemblyOptions& options) {
  AugRecord r;
  r.image = image;
  r.annotation = page;
  r.transcript = transcript_of(page, assemble_lines(page, options), map);
  r.provenance.source_id = page.image_id;
  return r;
}

Rgb estimate_background(const Raster& image, const PageAnnotation& page) {
  if (image.empty()) return {};
  const std::size_t total = static_cast<std::size_t>(image.width()) * image.height();
  const int step = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total) / 1e5)));
  std::vector<std::uint8_t> covered(total, 0);
  for (const auto& b : page.boxes) {
    for (int y = std::max(0, b.y); y < std::min(image.height(), b.y + b.h); ++y) {
      for (int x = std::max(0, b.x); x < std::min(image.width(), b.x + b.w); ++x) {
        covered[static_cast<std::size_t>(y) * image.width() + x] = 1;
      }
    }
  }
  std::array<std::vector<std::uint8_t>, 3> outside, all;
  for (int y = 0; y < image.height(); y += step) {
    for (int x = 0; x < image.width(); x += step) {
      const Rgb c = image.at(x, y);
      const bool in_box = covered[static_cast<std::size_t>(y) * image.width() + x] != 0;
      for (int ch = 0; ch < 3; ++ch) {
        const std::uint8_t v = ch == 0 ? c.r : ch == 1 ? c.g : c.b;
        all[ch].push_back(v);
        if (!in_box) outside[ch].push_back(v);
      }
    }
  }
  auto& pool = outside[0].empty() ? all : outside;
  std::array<std::uint8_t, 3> med{};
  for (int ch = 0; ch < 3; ++ch) {
    auto& v = pool[ch];
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    med[ch] = *mid;
  }
  return {med[0], med[1], med[2]};
}

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

CharBox clip_box(const CharBox& b, double x0, double y0, double x1, double y1, int width, int height) {
  int ix0 = static_cast<int>(std::lround(x0));
  int iy0 = static_cast<int>(std::lround(y0));
  int ix1 = static_cast<int>(std::lround(x1));
  int iy1 = static_cast<int>(std::lround(y1));
  ix0 = std::clamp(ix0, 0, width - 1);
  iy0 = std::clamp(iy0, 0, height - 1);
  ix1 = std::clamp(ix1, ix0 + 1, width);
  iy1 = std::clamp(iy1, iy0 + 1, height);
  CharBox out = b;
  out.x = ix0;
  out.y = iy0;
  out.w = ix1 - ix0;
  out.h = iy1 - iy0;
  return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

AugRecord erase_selected(const AugRecord& in, const std::vector<TextLine>& lines, const std::vector<int>& ranks,
                         int margin) {
  std::vector<int> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  AugRecord out = in;
  if (sorted.empty()) {
    out.provenance.ops.push_back("erase(k=0)");
    return out;
  }
  if (lines.size() != in.transcript.lines.size()) {
    throw Error("erase_lines: line list does not match the transcript of '" + in.annotation.image_id + "'");
  }
  const Rgb fill = estimate_background(in.image, in.annotation);
  std::vector<char> drop_box(in.annotation.boxes.size(), 0);
  std::vector<char> drop_line(lines.size(), 0);
  for (const int r : sorted) {
    if (r < 0 || static_cast<std::size_t>(r) >= lines.size()) {
      throw Error("erase_lines: line rank " + std::to_string(r) + " out of range");
    }
    drop_line[r] = 1;
    const Rect& bb = lines[r].bbox;
    const int x0 = std::max(0, bb.x0 - margin), y0 = std::max(0, bb.y0 - margin);
    const int x1 = std::min(in.image.width(), bb.x1 + margin), y1 = std::min(in.image.height(), bb.y1 + margin);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) out.image.set(x, y, fill);
    }
    for (const auto i : lines[r].box_indices) drop_box[i] = 1;
  }
  out.annotation.boxes.clear();
  for (std::size_t i = 0; i < in.annotation.boxes.size(); ++i) {
    if (!drop_box[i]) out.annotation.boxes.push_back(in.annotation.boxes[i]);
  }
  std::vector<std::string> kept;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (!drop_line[r]) kept.push_back(in.transcript.lines[r]);
  }
  out.transcript = make_transcript(std::move(kept));
  out.provenance.erased_ranks = sorted;
  out.provenance.ops.push_back("erase(k=" + std::to_string(sorted.size()) + ",margin=" + std::to_string(margin) + ")");
  return out;
}

AugRecord erase_lines(const AugRecord& in, const std::vector<TextLine>& lines, const AugmentationSpec& spec) {
  spec.validate();
  if (lines.empty()) throw Error("erase_lines: page '" + in.annotation.image_id + "' has no lines");
  if (static_cast<std::size_t>(spec.k_max) > lines.size()) {
    throw Error("erase_lines: k_max " + std::to_string(spec.k_max) + " exceeds the " + std::to_string(lines.size()) +
                " lines of '" + in.annotation.image_id + "'");
  }
  Rng rng(derive_seed(spec.seed, "erase"));
  const auto k = static_cast<std::size_t>(rng.uniform_int(spec.k_min, spec.k_max));
  std::vector<int> order(lines.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(std::span<int>(order));
  order.resize(k);
  return erase_selected(in, lines, order, spec.erase_margin);
}

std::array<double, 2> apply_homography(const Homography& h, double x, double y) {
  const double w = h[6] * x + h[7] * y + h[8];
  return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
}

Homography invert_homography(const Homography& h) {
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d inv = m.inverse();
  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = inv(r, c) / inv(2, 2);
  }
  return out;
}

Homography homography_from_quads(const std::array<std::array<double, 2>, 4>& src,
                                 const std::array<std::array<double, 2>, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> sol = a.fullPivLu().solve(b);
  Homography h;
  for (int i = 0; i < 8; ++i) h[i] = sol(i);
  h[8] = 1.0;
  return h;
}

std::array<std::array<double, 2>, 4> skew_quad(int width, int height, double theta_deg) {
  const double w = width, h = height;
  const double d = 0.5 * w * std::tan(theta_deg * std::numbers::pi / 180.0);
  std::array<std::array<double, 2>, 4> q{{{0.0, -d}, {w, d}, {w, h - d}, {0.0, h + d}}};
  const double span = h + 2.0 * std::abs(d);
  const double s = span > h ? h / span : 1.0;
  for (auto& p : q) {
    p[0] = 0.5 * w + s * (p[0] - 0.5 * w);
    p[1] = 0.5 * h + s * (p[1] - 0.5 * h);
  }
  return q;
}

Homography skew_homography(int width, int height, double theta_deg) {
  const double w = width, h = height;
  return homography_from_quads({{{0.0, 0.0}, {w, 0.0}, {w, h}, {0.0, h}}}, skew_quad(width, height, theta_deg));
}

AugRecord warp_homography(const AugRecord& in, const Homography& h, const std::string& op) {
  AugRecord out = in;
  const Rgb fill = estimate_background(in.image, in.annotation);
  const Homography inv = invert_homography(h);
  const int width = in.image.width(), height = in.image.height();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto src = apply_homography(inv, x + 0.5, y + 0.5);
      const auto c = sample_bilinear(in.image, src[0], src[1], fill);
      out.image.set(x, y, {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])});
    }
  }
  for (auto& b : out.annotation.boxes) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& [cx, cy] : {std::pair<double, double>{b.x, b.y}, {b.x + b.w, b.y}, {b.x + b.w, b.y + b.h},
                                 {b.x, b.y + b.h}}) {
      const auto p = apply_homography(h, cx, cy);
      x0 = std::min(x0, p[0]);
      y0 = std::min(y0, p[1]);
      x1 = std::max(x1, p[0]);
      y1 = std::max(y1, p[1]);
    }
    b = clip_box(b, x0, y0, x1, y1, width, height);
  }
  out.provenance.ops.push_back(op);
  return out;
}

AugRecord skew_lr_angle(const AugRecord& in, double theta_deg) {
  if (theta_deg == 0.0) {
    AugRecord out = in;
    out.provenance.ops.push_back("skew(theta=0)");
    return out;
  }
  return warp_homography(in, skew_homography(in.image.width(), in.image.height(), theta_deg),
                         "skew(theta=" + format_number(theta_deg) + ")");
}

AugRecord skew_lr(const AugRecord& in, const AugmentationSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "skew"));
  return skew_lr_angle(in, rng.uniform(-spec.skew_max_deg, spec.skew_max_deg));
}

std::array<double, 2> DisplacementField::at(double x, double y) const {
  const int ix = std::clamp(static_cast<int>(std::floor(x)), 0, width - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(y)), 0, height - 1);
  const std::size_t i = static_cast<std::size_t>(iy) * width + ix;
  return {dx[i], dy[i]};
}

DisplacementField make_displacement_field(int width, int height, double alpha, double sigma, std::uint64_t seed) {
  DisplacementField f;
  f.width = width;
  f.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  f.dx.assign(n, 0.0);
  f.dy.assign(n, 0.0);
  if (alpha == 0.0) return f;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) f.dx[i] = alpha * rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) f.dy[i] = alpha * rng.uniform(-1.0, 1.0);
  f.dx = gaussian_blur(f.dx, width, height, sigma);
  f.dy = gaussian_blur(f.dy, width, height, sigma);
  return f;
}

AugRecord apply_displacement(const AugRecord& in, const DisplacementField& field, const std::string& op) {
  AugRecord out = in;
  const int width = in.image.width(), height = in.image.height();
  if (field.width != width || field.height != height) throw ShapeError("displacement field does not match image");
  const Rgb fill = estimate_background(in.image, in.annotation);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const auto c = sample_bilinear(in.image, x + 0.5 + field.dx[i], y + 0.5 + field.dy[i], fill);
      out.image.set(x, y, {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])});
    }
  }
  for (auto& b : out.annotation.boxes) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& [cx, cy] : {std::pair<double, double>{b.x, b.y}, {b.x + b.w, b.y}, {b.x + b.w, b.y + b.h},
                                 {b.x, b.y + b.h}}) {
      const auto d = field.at(cx, cy);
      x0 = std::min(x0, cx - d[0]);
      y0 = std::min(y0, cy - d[1]);
      x1 = std::max(x1, cx - d[0]);
      y1 = std::max(y1, cy - d[1]);
    }
    b = clip_box(b, x0, y0, x1, y1, width, height);
  }
  out.provenance.ops.push_back(op);
  return out;
}

AugRecord elastic_distort(const AugRecord& in, const AugmentationSpec& spec) {
  spec.validate();
  const auto field = make_displacement_field(in.image.width(), in.image.height(), spec.elastic_alpha,
                                             spec.elastic_sigma, derive_seed(spec.seed, "elastic"));
  return apply_displacement(in, field,
                            "elastic(alpha=" + format_number(spec.elastic_alpha) +
                                ",sigma=" + format_number(spec.elastic_sigma) + ")");
}

std::string generated_id(const std::string& source_id) { return source_id + "_gen"; }

std::vector<AugRecord> generate_erasure_set(const std::vector<SourcePage>& pages, const AugmentationSpec& spec,
                                            const CodepointMap& map, Diagnostics* diag, int jobs,
                                            const LineAssemblyOptions& options) {
  spec.validate();
  if (pages.empty()) throw Error("generate_erasure_set: no input pages");
  std::vector<AugRecord> out(pages.size());
  std::vector<std::string> warnings(pages.size());
  parallel_for(pages.size(), jobs, [&](std::size_t i) {
    const PageAnnotation& page = *pages[i].page;
    const auto lines = assemble_lines(page, options);
    AugmentationSpec local = spec;
    local.seed = spec.seed ^ fnv1a64(page.image_id);
    AugRecord rec = make_record(*pages[i].image, page, map, options);
    rec.provenance.seed = local.seed;
    if (local.erase) {
      const int keep_one = std::max(0, static_cast<int>(lines.size()) - 1);
      if (keep_one < spec.k_min) {
        warnings[i] = "page '" + page.image_id + "' has " + std::to_string(lines.size()) +
                      " lines, too few for k_min; erasing " + std::to_string(keep_one);
        local.k_min = local.k_max = keep_one;
      } else {
        local.k_max = std::min(local.k_max, keep_one);
        local.k_min = std::min(local.k_min, local.k_max);
      }
      if (lines.empty()) {
        rec.provenance.ops.push_back("erase(k=0)");
      } else {
        rec = erase_lines(rec, lines, local);
      }
    }
    if (local.skew) rec = skew_lr(rec, local);
    if (local.elastic) rec = elastic_distort(rec, local);
    rec.annotation.image_id = generated_id(page.image_id);
    out[i] = std::move(rec);
  });
  if (diag) {
    for (auto& w : warnings) {
      if (!w.empty()) diag->warn(std::move(w));
    }
  }
  return out;
}

std::string format_provenance(const std::vector<AugRecord>& records, const std::vector<std::string>& metadata) {
  std::ostringstream os;
  os << "#kforge-prov v1\n";
  for (const auto& m : metadata) os << '#' << m << '\n';
  for (const auto& r : records) {
    os << r.provenance.source_id << '\t';
    for (std::size_t i = 0; i < r.provenance.ops.size(); ++i) os << (i ? ";" : "") << r.provenance.ops[i];
    if (r.provenance.ops.empty()) os << '-';
    os << '\t' << hex64(r.provenance.seed) << '\t';
    for (std::size_t i = 0; i < r.provenance.erased_ranks.size(); ++i) {
      os << (i ? "," : "") << r.provenance.erased_ranks[i];
    }
    if (r.provenance.erased_ranks.empty()) os << '-';
    os << '\n';
  }
  return os.str();
}

void write_records(const std::vector<AugRecord>& records, const std::string& dir,
                   const std::vector<std::string>& metadata) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::vector<PageAnnotation> pages;
  for (const auto& r : records) {
    write_png((fs::path(dir) / "images" / (r.annotation.image_id + ".png")).string(), r.image);
    pages.push_back(r.annotation);
  }
  save_pages((fs::path(dir) / "pages.txt").string(), pages, metadata);
  write_file((fs::path(dir) / "provenance.txt").string(), format_provenance(records, metadata));
}

}  // namespace kforge::aug
