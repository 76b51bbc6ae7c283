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

#include <cstdint>
#include <string>
#include <vector>

#include "kforge/annotation.hpp"
#include "kforge/image.hpp"
#include "kforge/lines.hpp"

namespace kforge::synth {

/// First private-use codepoint; glyph k maps to kFirstCodepoint + k.
inline constexpr char32_t kFirstCodepoint = 0xE000;

struct Stroke {
  enum class Kind { kLine, kArc };
  Kind kind = Kind::kLine;
  // Line: (a, b) -> (c, d). Arc: centre (a, b), radius c, angles [d, e] in radians.
  double a = 0, b = 0, c = 0, d = 0, e = 0;
};

struct GlyphSpec {
  char32_t codepoint = 0;
  std::vector<Stroke> strokes;  // unit-cell coordinates
  int nominal_size = 16;
};

/// Binary glyph bitmap at a given size, row-major.
struct GlyphBitmap {
  int size = 0;
  std::vector<std::uint8_t> ink;
};

GlyphBitmap render_glyph(const GlyphSpec& glyph, int size);
double mask_iou(const GlyphBitmap& a, const GlyphBitmap& b);

/// Procedurally draws `count` mutually distinct glyphs (pairwise IoU < max_iou).
std::vector<GlyphSpec> make_alphabet(int count, int nominal_size, std::uint64_t seed, double max_iou = 0.6);

struct CorpusParams {
  int alphabet_size = 10;
  int glyph_size = 16;
  int lines_min = 3;
  int lines_max = 5;
  int chars_min = 3;
  int chars_max = 6;
  int column_gap_min = 8;   // pixels between neighbouring columns
  int column_gap_max = 14;
  int char_gap_min = 2;     // vertical pixels between characters
  int char_gap_max = 5;
  int jitter_x = 1;
  int jitter_y = 1;
  int page_width = 160;
  int page_height = 144;
  int margin = 8;
  int box_pad = 2;
  Rgb background{228, 214, 180};
  Rgb ink{40, 30, 25};
  int noise_level = 6;
  std::uint64_t seed = 1;
  std::uint64_t alphabet_seed = 20200101;

  /// Throws ConfigError when a range is empty or columns could merge.
  void validate() const;
};

/// Ink pixels of one rendered character, in page coordinates.
struct InkMask {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
  std::vector<std::uint8_t> ink;  // size × size

  bool at(int x, int y) const;  // page coordinates
  Rect bounds() const;          // tight bounds of the ink
  /// Mean ink position (pixel centres).
  std::pair<double, double> centroid() const;
};

struct SynthPage {
  Raster image;
  PageAnnotation page;
  /// Reference reading order: lines right to left, box indices top to bottom.
  std::vector<std::vector<std::size_t>> reading_order;
  std::vector<InkMask> masks;  // parallel to page.boxes
  PageTranscript transcript;
  Rgb background;
};

/// Renders one page. Box order in the annotation is shuffled so the source
/// order carries no layout information.
SynthPage gen_page(const CorpusParams& params, const std::vector<GlyphSpec>& alphabet, const std::string& image_id,
                   std::uint64_t page_seed);

CodepointMap alphabet_map(const std::vector<GlyphSpec>& alphabet);

struct SynthCorpus {
  std::vector<GlyphSpec> alphabet;
  CodepointMap map;
  std::vector<SynthPage> pages;
  DatasetSplit split;
};

std::string page_id(std::size_t index);

/// Pages are seeded by seed XOR hash(image_id); split is 9:1 with the same seed.
SynthCorpus gen_corpus(const CorpusParams& params, std::size_t n_pages, std::size_t first_index = 0);

/// Writes images/<id>.png, train.csv, unicode_translation.csv, pages.txt,
/// split.txt and oracle.txt under `dir`.
void write_corpus(const SynthCorpus& corpus, const std::string& dir, const std::vector<std::string>& metadata = {});

/// `#kforge-oracle v1`: per page, reading order and ink bounds of each box.
std::string format_oracle(const std::vector<SynthPage>& pages, const std::vector<std::string>& metadata = {});

}  // namespace kforge::synth
