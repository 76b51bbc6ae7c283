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

#include "kforge/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <set>
#include <sstream>

#include "kforge/csv.hpp"
#include "kforge/error.hpp"
#include "kforge/rng.hpp"

namespace kforge {

namespace {

constexpr std::string_view kPagesHeader = "#kforge-pages v1";

bool parse_int(std::string_view token, int& out) {
  if (token.empty()) return false;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::vector<std::string_view> tokens_of(std::string_view cell) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < cell.size()) {
    while (i < cell.size() && (cell[i] == ' ' || cell[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < cell.size() && cell[i] != ' ' && cell[i] != '\t') ++i;
    if (i > start) out.push_back(cell.substr(start, i - start));
  }
  return out;
}

// Intersects the box with the page; returns false when nothing is left.
bool clip_box(CharBox& box, int width, int height) {
  const int x0 = std::max(box.x, 0);
  const int y0 = std::max(box.y, 0);
  const int x1 = std::min(box.x + box.w, width);
  const int y1 = std::min(box.y + box.h, height);
  if (x1 <= x0 || y1 <= y0) return false;
  box = {box.codepoint, x0, y0, x1 - x0, y1 - y0};
  return true;
}

void check_version(std::string_view header, std::string_view expected) {
  if (header == expected) return;
  const auto space = expected.rfind(' ');
  const std::string_view magic = expected.substr(0, space);
  if (header.substr(0, magic.size()) == magic) {
    throw FormatError("version mismatch: expected '" + std::string(expected.substr(space + 1)) + "', found '" +
                      std::string(header.substr(std::min(header.size(), magic.size() + 1))) + "'");
  }
  throw FormatError("missing header '" + std::string(expected) + "'");
}

std::vector<std::string_view> split_fields(std::string_view line) { return split(line, '\t'); }

}  // namespace

const std::string& CodepointMap::at(char32_t cp) const {
  const auto it = entries_.find(cp);
  if (it == entries_.end()) throw Error("codepoint " + format_codepoint(cp) + " missing from codepoint map");
  return it->second;
}

std::vector<PageAnnotation> parse_annotation_table(std::string_view csv_text, const SizeLookup& size_of,
                                                   Diagnostics* diag) {
  Diagnostics local;
  Diagnostics& d = diag ? *diag : local;
  const auto rows = parse_csv(csv_text);
  if (rows.empty() || rows.front().fields.size() != 2 || rows.front().fields[0] != "image_id" ||
      rows.front().fields[1] != "labels") {
    throw ParseError("annotation table must start with header 'image_id,labels'");
  }

  std::vector<PageAnnotation> pages;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    const std::string where = "line " + std::to_string(row.line);
    if (row.fields.size() != 2) throw ParseError(where + ": expected 2 fields, found " + std::to_string(row.fields.size()));
    PageAnnotation page;
    page.image_id = row.fields[0];
    if (page.image_id.empty()) throw ParseError(where + ": empty image_id");
    if (!seen.insert(page.image_id).second) throw ParseError(where + ": duplicate image_id '" + page.image_id + "'");
    const std::string row_name = where + " (" + page.image_id + ")";

    const auto tokens = tokens_of(row.fields[1]);
    if (tokens.size() % 5 != 0) {
      throw ParseError(row_name + ": label token count " + std::to_string(tokens.size()) + " is not a multiple of 5");
    }
    const ImageSize size = size_of(page.image_id);
    page.width = size.width;
    page.height = size.height;

    for (std::size_t t = 0; t < tokens.size(); t += 5) {
      CharBox box;
      try {
        box.codepoint = parse_codepoint(tokens[t]);
      } catch (const ParseError& e) {
        throw ParseError(row_name + ": " + e.what());
      }
      int* fields[4] = {&box.x, &box.y, &box.w, &box.h};
      for (int k = 0; k < 4; ++k) {
        if (!parse_int(tokens[t + 1 + k], *fields[k])) {
          throw ParseError(row_name + ": non-integer coordinate '" + std::string(tokens[t + 1 + k]) + "'");
        }
      }
      if (box.w < 1 || box.h < 1) {
        throw ParseError(row_name + ": box " + std::to_string(t / 5) + " has non-positive size");
      }
      const CharBox original = box;
      if (!clip_box(box, page.width, page.height)) {
        d.warn(row_name + ": box " + std::to_string(t / 5) + " lies outside the " + std::to_string(page.width) + "x" +
               std::to_string(page.height) + " image; dropped");
        continue;
      }
      if (!(box == original)) {
        d.warn(row_name + ": box " + std::to_string(t / 5) + " overflows the image; clipped");
      }
      page.boxes.push_back(box);
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

std::string find_page_image(const std::string& image_dir, const std::string& image_id) {
  namespace fs = std::filesystem;
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    const fs::path candidate = fs::path(image_dir) / (image_id + ext);
    if (fs::exists(candidate)) return candidate.string();
  }
  throw LoadError("no image for '" + image_id + "' in '" + image_dir + "'");
}

std::vector<PageAnnotation> parse_dataset(const std::string& annotation_file, const std::string& image_dir,
                                          Diagnostics* diag) {
  const std::string text = read_file(annotation_file);
  return parse_annotation_table(
      text, [&](const std::string& id) { return image_dimensions(find_page_image(image_dir, id)); }, diag);
}

CodepointMap parse_codepoint_map(std::string_view csv_text, Diagnostics* diag) {
  Diagnostics local;
  Diagnostics& d = diag ? *diag : local;
  CodepointMap map;
  const auto rows = parse_csv(csv_text);
  std::size_t first = 0;
  if (!rows.empty() && rows.front().fields.size() == 2 && rows.front().fields[0] == "Unicode") first = 1;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != 2) {
      throw ParseError("line " + std::to_string(row.line) + ": expected 2 fields, found " +
                       std::to_string(row.fields.size()));
    }
    char32_t cp = 0;
    try {
      cp = parse_codepoint(row.fields[0]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(row.line) + ": " + e.what());
    }
    if (map.contains(cp)) {
      d.warn("line " + std::to_string(row.line) + ": duplicate codepoint " + format_codepoint(cp) + "; last wins");
    }
    map.insert(cp, row.fields[1]);
  }
  return map;
}

CodepointMap load_codepoint_map(const std::string& path, Diagnostics* diag) {
  return parse_codepoint_map(read_file(path), diag);
}

DatasetSplit split_train_valid(const std::vector<std::string>& ids, std::uint64_t seed) {
  if (ids.empty()) throw Error("split_train_valid: no ids");
  std::set<std::string_view> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw Error("split_train_valid: duplicate ids");

  std::vector<std::string> order = ids;
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(order));
  const std::size_t n_valid = ids.size() >= 2 ? std::max<std::size_t>(1, ids.size() / 10) : 0;
  DatasetSplit split;
  split.seed = seed;
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(order.size() - n_valid);
  split.train.assign(order.begin(), cut);
  split.valid.assign(cut, order.end());
  return split;
}

std::string format_split(const DatasetSplit& split, const std::vector<std::string>& metadata) {
  std::string out = "#kforge-split v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  out += "#seed=" + std::to_string(split.seed) + "\n";
  for (const auto& id : split.train) out += "train\t" + id + "\n";
  for (const auto& id : split.valid) out += "valid\t" + id + "\n";
  return out;
}

DatasetSplit parse_split(std::string_view text) {
  const auto header_end = text.find('\n');
  if (header_end == std::string_view::npos) throw FormatError("missing header '#kforge-split v1'");
  check_version(text.substr(0, header_end), "#kforge-split v1");
  DatasetSplit split;
  std::size_t pos = header_end + 1;
  int line_no = 1;
  while (pos < text.size()) {
    ++line_no;
    const auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) throw FormatError("line " + std::to_string(line_no) + ": truncated record");
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.rfind("#seed=", 0) == 0) {
      const auto v = line.substr(6);
      const auto r = std::from_chars(v.data(), v.data() + v.size(), split.seed);
      if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": bad seed");
      }
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split_fields(line);
    if (cols.size() != 2 || (cols[0] != "train" && cols[0] != "valid")) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 'train|valid<TAB>id'");
    }
    (cols[0] == "train" ? split.train : split.valid).emplace_back(cols[1]);
  }
  return split;
}

DatasetSplit load_split(const std::string& path) { return parse_split(read_file(path)); }

std::string format_pages(const std::vector<PageAnnotation>& pages, const std::vector<std::string>& metadata) {
  std::string out(kPagesHeader);
  out += '\n';
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (const auto& page : pages) {
    out += page.image_id;
    out += '\t' + std::to_string(page.width) + '\t' + std::to_string(page.height) + '\t';
    for (std::size_t i = 0; i < page.boxes.size(); ++i) {
      const CharBox& b = page.boxes[i];
      if (i) out += ',';
      out += format_codepoint(b.codepoint) + ':' + std::to_string(b.x) + ':' + std::to_string(b.y) + ':' +
             std::to_string(b.w) + ':' + std::to_string(b.h);
    }
    out += '\n';
  }
  return out;
}

std::vector<PageAnnotation> parse_pages(std::string_view text) {
  const auto header_end = text.find('\n');
  if (header_end == std::string_view::npos) throw FormatError("missing header '" + std::string(kPagesHeader) + "'");
  check_version(text.substr(0, header_end), kPagesHeader);

  std::vector<PageAnnotation> pages;
  std::size_t pos = header_end + 1;
  int line_no = 1;
  while (pos < text.size()) {
    ++line_no;
    const auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) throw FormatError("line " + std::to_string(line_no) + ": truncated record");
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.front() == '#') continue;
    const auto cols = split(line, '\t');
    const std::string where = "line " + std::to_string(line_no);
    if (cols.size() != 4) throw FormatError(where + ": expected 4 tab-separated fields");
    PageAnnotation page;
    page.image_id = std::string(cols[0]);
    if (!parse_int(cols[1], page.width) || !parse_int(cols[2], page.height) || page.width < 0 || page.height < 0) {
      throw FormatError(where + ": corrupted width/height field");
    }
    if (!cols[3].empty()) {
      for (const auto item : split(cols[3], ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 5) throw FormatError(where + ": malformed box '" + std::string(item) + "'");
        CharBox box;
        try {
          box.codepoint = parse_codepoint(parts[0]);
        } catch (const ParseError& e) {
          throw FormatError(where + ": " + e.what());
        }
        if (!parse_int(parts[1], box.x) || !parse_int(parts[2], box.y) || !parse_int(parts[3], box.w) ||
            !parse_int(parts[4], box.h)) {
          throw FormatError(where + ": malformed box '" + std::string(item) + "'");
        }
        page.boxes.push_back(box);
      }
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

void save_pages(const std::string& path, const std::vector<PageAnnotation>& pages,
                const std::vector<std::string>& metadata) {
  write_file(path, format_pages(pages, metadata));
}

std::vector<PageAnnotation> load_pages(const std::string& path) { return parse_pages(read_file(path)); }

std::string format_annotation_table(const std::vector<PageAnnotation>& pages) {
  std::string out = "image_id,labels\n";
  for (const auto& page : pages) {
    std::string labels;
    for (const auto& b : page.boxes) {
      if (!labels.empty()) labels += ' ';
      labels += format_codepoint(b.codepoint) + ' ' + std::to_string(b.x) + ' ' + std::to_string(b.y) + ' ' +
                std::to_string(b.w) + ' ' + std::to_string(b.h);
    }
    out += csv_field(page.image_id) + ',' + labels + '\n';
  }
  return out;
}

}  // namespace kforge
