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

#include "kforge/annotation.hpp"
#include "kforge/image.hpp"
#include "kforge/lines.hpp"
#include "kforge/util.hpp"

namespace kforge::aug {

struct AugmentationSpec {
  int k_min = 1;
  int k_max = 3;
  int erase_margin = 4;
  double skew_max_deg = 10.0;
  double elastic_alpha = 4.0;
  double elastic_sigma = 8.0;
  std::uint64_t seed = 1;
  bool erase = true;
  bool skew = true;
  bool elastic = true;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

struct Provenance {
  std::string source_id;
  std::vector<std::string> ops;  // applied in order
  std::uint64_t seed = 0;
  std::vector<int> erased_ranks;  // ascending line ranks of the source page

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AugRecord {
  Raster image;
  PageAnnotation annotation;
  PageTranscript transcript;
  Provenance provenance;

  friend bool operator==(const AugRecord&, const AugRecord&) = default;
};

/// Wraps an untouched page as a record (empty op chain).
AugRecord make_record(const Raster& image, const PageAnnotation& page, const CodepointMap& map,
                      const LineAssemblyOptions& options = {});

/// Per-channel median of pixels outside every box, sampled on a uniform grid
/// of at most 1e5 points. Falls back to the whole image when boxes cover it.
Rgb estimate_background(const Raster& image, const PageAnnotation& page);

/// Erases the given line ranks (indices into `lines`) by filling each line
/// box, dilated by `margin`, with the estimated background.
AugRecord erase_selected(const AugRecord& in, const std::vector<TextLine>& lines, const std::vector<int>& ranks,
                         int margin);

/// Draws k ~ U{k_min..k_max} and a uniform k-subset of lines from spec.seed.
/// Throws Error when the page has no lines or k_max exceeds the line count.
AugRecord erase_lines(const AugRecord& in, const std::vector<TextLine>& lines, const AugmentationSpec& spec);

/// Row-major 3×3 matrix mapping source pixel coordinates to destination.
using Homography = std::array<double, 9>;

std::array<double, 2> apply_homography(const Homography& h, double x, double y);
Homography invert_homography(const Homography& h);
/// Homography taking the four `src` corners onto the four `dst` corners.
Homography homography_from_quads(const std::array<std::array<double, 2>, 4>& src,
                                 const std::array<std::array<double, 2>, 4>& dst);

/// Destination corners (TL, TR, BR, BL) of the left-right skew: the left edge
/// is stretched and the right edge shrunk vertically by (W/2)·tan(theta)
/// each way, then the quad is scaled about the canvas centre to fit inside.
std::array<std::array<double, 2>, 4> skew_quad(int width, int height, double theta_deg);
Homography skew_homography(int width, int height, double theta_deg);

/// Warps image and boxes by `h` (inverse mapping, bilinear, background fill).
/// Boxes become the rounded bounding rectangle of their mapped corners.
AugRecord warp_homography(const AugRecord& in, const Homography& h, const std::string& op);

/// θ ~ U[-skew_max_deg, skew_max_deg] from spec.seed.
AugRecord skew_lr(const AugRecord& in, const AugmentationSpec& spec);
AugRecord skew_lr_angle(const AugRecord& in, double theta_deg);

/// Displacement field (dx, dy per pixel): uniform [-alpha, alpha] noise
/// blurred with a Gaussian of the given sigma.
struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  std::array<double, 2> at(double x, double y) const;
};

DisplacementField make_displacement_field(int width, int height, double alpha, double sigma, std::uint64_t seed);

/// Output pixel p samples the input at p + d(p); box corners move by -d.
AugRecord apply_displacement(const AugRecord& in, const DisplacementField& field, const std::string& op);
AugRecord elastic_distort(const AugRecord& in, const AugmentationSpec& spec);

struct SourcePage {
  const Raster* image = nullptr;
  const PageAnnotation* page = nullptr;
};

/// One record per page: erase, then skew, then elastic distortion, each
/// seeded from spec.seed XOR hash(image_id). Pages with at most k_min lines
/// get k clamped to |lines|-1 with a warning; k_max is always capped at
/// |lines|-1 so no page is emptied.
std::vector<AugRecord> generate_erasure_set(const std::vector<SourcePage>& pages, const AugmentationSpec& spec,
                                            const CodepointMap& map, Diagnostics* diag = nullptr, int jobs = 1,
                                            const LineAssemblyOptions& options = {});

/// Id of the generated page derived from `source_id`.
std::string generated_id(const std::string& source_id);

/// `#kforge-prov v1`: `source_id<TAB>op;op;...<TAB>seed<TAB>rank,rank,...` per record.
std::string format_provenance(const std::vector<AugRecord>& records, const std::vector<std::string>& metadata = {});

/// Writes <dir>/images/<generated id>.png, pages.txt and provenance.txt.
void write_records(const std::vector<AugRecord>& records, const std::string& dir,
                   const std::vector<std::string>& metadata = {});

}  // namespace kforge::aug
