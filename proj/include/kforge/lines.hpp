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

#include <string>
#include <vector>

#include "kforge/annotation.hpp"

namespace kforge {

/// Pixel rectangle [x0, x1) × [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(const CharBox& b) const { return b.x >= x0 && b.y >= y0 && b.x + b.w <= x1 && b.y + b.h <= y1; }
  static Rect of(const CharBox& b) { return {b.x, b.y, b.x + b.w, b.y + b.h}; }
  Rect united(const Rect& o) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// One vertical column of characters, members ordered top to bottom.
struct TextLine {
  std::vector<std::size_t> box_indices;
  Rect bbox;
  double x_center = 0.0;

  friend bool operator==(const TextLine&, const TextLine&) = default;
};

/// Reserved line-break symbol in flat transcripts.
inline constexpr char kLineSeparator = '\n';

struct PageTranscript {
  std::vector<std::string> lines;  // reading order, rightmost column first
  std::string flat;

  friend bool operator==(const PageTranscript&, const PageTranscript&) = default;
};

struct LineAssemblyOptions {
  /// A box joins a line when their horizontal overlap is at least this
  /// fraction of the narrower of the two.
  double overlap_threshold = 0.4;
};

/// Groups boxes into vertical lines and orders them right to left.
std::vector<TextLine> assemble_lines(const PageAnnotation& page, const LineAssemblyOptions& options = {});

/// Maps every line's boxes through the codepoint table. Throws Error naming
/// the page and codepoint when a box's codepoint is missing.
PageTranscript transcript_of(const PageAnnotation& page, const std::vector<TextLine>& lines,
                             const CodepointMap& map);

PageTranscript make_transcript(std::vector<std::string> lines);

/// `#kforge-lines v1` dump: `image_id<TAB>line_rank<TAB>idx,idx,...` per line.
std::string format_line_dump(const std::vector<PageAnnotation>& pages,
                             const std::vector<std::vector<TextLine>>& lines,
                             const std::vector<std::string>& metadata = {});

/// `#kforge-transcripts v1`: `image_id<TAB>flat transcript` per record, with
/// backslash, tab and newline escaped as \\, \t and \n.
using TranscriptSet = std::vector<std::pair<std::string, std::string>>;
std::string format_transcripts(const TranscriptSet& set, const std::vector<std::string>& metadata = {});
/// Files without the header are read as one transcript per line, ids being line numbers.
TranscriptSet parse_transcripts(std::string_view text);

}  // namespace kforge
