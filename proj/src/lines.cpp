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

#include "kforge/lines.hpp"

#include <algorithm>
#include <numeric>

#include "kforge/error.hpp"
#include "kforge/util.hpp"

namespace kforge {

Rect Rect::united(const Rect& o) const {
  return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
}

std::vector<TextLine> assemble_lines(const PageAnnotation& page, const LineAssemblyOptions& options) {
  const auto& boxes = page.boxes;
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (boxes[a].center_x() != boxes[b].center_x()) return boxes[a].center_x() > boxes[b].center_x();
    return boxes[a].center_y() < boxes[b].center_y();
  });

  std::vector<TextLine> lines;
  for (const std::size_t idx : order) {
    const CharBox& box = boxes[idx];
    const Rect r = Rect::of(box);
    std::ptrdiff_t best = -1;
    double best_ratio = 0.0;
    for (std::size_t li = 0; li < lines.size(); ++li) {
      const Rect& lb = lines[li].bbox;
      const int overlap = std::min(r.x1, lb.x1) - std::max(r.x0, lb.x0);
      const double narrow = std::min(r.width(), lb.width());
      if (overlap <= 0) continue;
      const double ratio = overlap / narrow;
      if (ratio >= options.overlap_threshold && ratio > best_ratio) {
        best = static_cast<std::ptrdiff_t>(li);
        best_ratio = ratio;
      }
    }
    if (best < 0) {
      lines.push_back(TextLine{{idx}, r, 0.0});
    } else {
      auto& line = lines[static_cast<std::size_t>(best)];
      line.box_indices.push_back(idx);
      line.bbox = line.bbox.united(r);
    }
  }

  for (auto& line : lines) {
    std::stable_sort(line.box_indices.begin(), line.box_indices.end(), [&](std::size_t a, std::size_t b) {
      if (boxes[a].center_y() != boxes[b].center_y()) return boxes[a].center_y() < boxes[b].center_y();
      if (boxes[a].center_x() != boxes[b].center_x()) return boxes[a].center_x() > boxes[b].center_x();
      return a < b;
    });
    double sum = 0.0;
    for (const auto i : line.box_indices) sum += boxes[i].center_x();
    line.x_center = sum / static_cast<double>(line.box_indices.size());
  }
  std::stable_sort(lines.begin(), lines.end(), [](const TextLine& a, const TextLine& b) {
    if (a.x_center != b.x_center) return a.x_center > b.x_center;
    return a.bbox.y0 < b.bbox.y0;
  });
  return lines;
}

PageTranscript make_transcript(std::vector<std::string> lines) {
  PageTranscript t;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) t.flat.push_back(kLineSeparator);
    t.flat += lines[i];
  }
  t.lines = std::move(lines);
  return t;
}

PageTranscript transcript_of(const PageAnnotation& page, const std::vector<TextLine>& lines,
                             const CodepointMap& map) {
  std::vector<std::string> texts;
  texts.reserve(lines.size());
  for (const auto& line : lines) {
    std::string text;
    for (const auto i : line.box_indices) {
      const char32_t cp = page.boxes.at(i).codepoint;
      if (!map.contains(cp)) {
        throw Error("page '" + page.image_id + "': codepoint " + format_codepoint(cp) + " missing from codepoint map");
      }
      text += map.at(cp);
    }
    texts.push_back(std::move(text));
  }
  return make_transcript(std::move(texts));
}

std::string format_line_dump(const std::vector<PageAnnotation>& pages,
                             const std::vector<std::vector<TextLine>>& lines,
                             const std::vector<std::string>& metadata) {
  if (pages.size() != lines.size()) throw ShapeError("format_line_dump: pages/lines size mismatch");
  std::string out = "#kforge-lines v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (std::size_t p = 0; p < pages.size(); ++p) {
    for (std::size_t rank = 0; rank < lines[p].size(); ++rank) {
      out += pages[p].image_id + '\t' + std::to_string(rank) + '\t';
      const auto& idx = lines[p][rank].box_indices;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k) out += ',';
        out += std::to_string(idx[k]);
      }
      out += '\n';
    }
  }
  return out;
}

std::string format_transcripts(const TranscriptSet& set, const std::vector<std::string>& metadata) {
  std::string out = "#kforge-transcripts v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (const auto& [id, text] : set) out += escape_field(id) + "\t" + escape_field(text) + "\n";
  return out;
}

TranscriptSet parse_transcripts(std::string_view text) {
  TranscriptSet out;
  const std::string_view header = "#kforge-transcripts ";
  const bool keyed = text.substr(0, header.size()) == header;
  std::size_t pos = 0;
  int line_no = 0;
  if (keyed) {
    const auto eol = text.find('\n');
    const auto version = text.substr(header.size(), eol - header.size());
    if (version != "v1") {
      throw FormatError("transcripts version mismatch: expected 'v1', found '" + std::string(version) + "'");
    }
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    line_no = 1;
  }
  while (pos < text.size()) {
    ++line_no;
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!keyed) {
      out.emplace_back(std::to_string(line_no), std::string(line));
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw FormatError("transcripts line " + std::to_string(line_no) + ": missing tab");
    out.emplace_back(unescape_field(std::string(line.substr(0, tab))), unescape_field(std::string(line.substr(tab + 1))));
  }
  return out;
}

}  // namespace kforge
