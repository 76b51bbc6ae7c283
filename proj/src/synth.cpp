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

#include "kforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"

namespace kforge::synth {

namespace {

double segment_distance(double px, double py, const Stroke& s) {
  const double dx = s.c - s.a;
  const double dy = s.d - s.b;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.a) * dx + (py - s.b) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (s.a + t * dx), py - (s.b + t * dy));
}

double arc_distance(double px, double py, const Stroke& s) {
  const double two_pi = 2.0 * std::numbers::pi;
  double angle = std::atan2(py - s.b, px - s.a);
  double rel = std::fmod(angle - s.d, two_pi);
  if (rel < 0) rel += two_pi;
  if (rel <= s.e - s.d) return std::abs(std::hypot(px - s.a, py - s.b) - s.c);
  const double ex0 = s.a + s.c * std::cos(s.d), ey0 = s.b + s.c * std::sin(s.d);
  const double ex1 = s.a + s.c * std::cos(s.e), ey1 = s.b + s.c * std::sin(s.e);
  return std::min(std::hypot(px - ex0, py - ey0), std::hypot(px - ex1, py - ey1));
}

Stroke random_stroke(Rng& rng) {
  Stroke s;
  if (rng.uniform01() < 0.6) {
    s.kind = Stroke::Kind::kLine;
    s.a = rng.uniform(0.12, 0.88);
    s.b = rng.uniform(0.12, 0.88);
    s.c = rng.uniform(0.12, 0.88);
    s.d = rng.uniform(0.12, 0.88);
  } else {
    s.kind = Stroke::Kind::kArc;
    s.a = rng.uniform(0.35, 0.65);
    s.b = rng.uniform(0.35, 0.65);
    s.c = rng.uniform(0.15, 0.3);
    s.d = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.e = s.d + rng.uniform(0.5 * std::numbers::pi, 1.5 * std::numbers::pi);
  }
  return s;
}

struct Bounds {
  int x0, y0, x1, y1;
};

Bounds ink_bounds(const GlyphBitmap& g) {
  Bounds b{g.size, g.size, 0, 0};
  for (int y = 0; y < g.size; ++y) {
    for (int x = 0; x < g.size; ++x) {
      if (!g.ink[static_cast<std::size_t>(y * g.size + x)]) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x + 1);
      b.y1 = std::max(b.y1, y + 1);
    }
  }
  return b;
}

}  // namespace

GlyphBitmap render_glyph(const GlyphSpec& glyph, int size) {
  GlyphBitmap out{size, std::vector<std::uint8_t>(static_cast<std::size_t>(size * size), 0)};
  const double half_width = 1.0 / size;  // strokes are about two pixels wide
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = (x + 0.5) / size;
      const double py = (y + 0.5) / size;
      for (const auto& s : glyph.strokes) {
        const double d = s.kind == Stroke::Kind::kLine ? segment_distance(px, py, s) : arc_distance(px, py, s);
        if (d <= half_width) {
          out.ink[static_cast<std::size_t>(y * size + x)] = 1;
          break;
        }
      }
    }
  }
  return out;
}

double mask_iou(const GlyphBitmap& a, const GlyphBitmap& b) {
  if (a.size != b.size) throw ShapeError("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.ink.size(); ++i) {
    inter += (a.ink[i] && b.ink[i]) ? 1 : 0;
    uni += (a.ink[i] || b.ink[i]) ? 1 : 0;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<GlyphSpec> make_alphabet(int count, int nominal_size, std::uint64_t seed, double max_iou) {
  if (count < 1) throw ConfigError("alphabet size must be positive");
  Rng rng(derive_seed(seed, "alphabet"));
  std::vector<GlyphSpec> glyphs;
  std::vector<GlyphBitmap> bitmaps;
  const double lo = 0.25 * nominal_size;
  const double hi = 0.75 * nominal_size;
  int attempts = 0;
  while (static_cast<int>(glyphs.size()) < count) {
    if (++attempts > 200000) throw ConfigError("cannot draw " + std::to_string(count) + " distinct glyphs");
    GlyphSpec g;
    g.codepoint = kFirstCodepoint + static_cast<char32_t>(glyphs.size());
    g.nominal_size = nominal_size;
    const auto n_strokes = rng.uniform_int(2, 4);
    for (std::int64_t i = 0; i < n_strokes; ++i) g.strokes.push_back(random_stroke(rng));
    GlyphBitmap bm = render_glyph(g, nominal_size);
    const double fill = static_cast<double>(std::count(bm.ink.begin(), bm.ink.end(), 1)) / bm.ink.size();
    if (fill < 0.12 || fill > 0.45) continue;
    const Bounds b = ink_bounds(bm);
    if (b.x0 > lo || b.y0 > lo || b.x1 < hi || b.y1 < hi) continue;
    bool distinct = true;
    for (const auto& other : bitmaps) {
      if (mask_iou(bm, other) >= max_iou) {
        distinct = false;
        break;
      }
    }
    if (!distinct) continue;
    glyphs.push_back(std::move(g));
    bitmaps.push_back(std::move(bm));
  }
  return glyphs;
}

void CorpusParams::validate() const {
  auto range = [](int lo, int hi, const char* name) {
    if (lo > hi) throw ConfigError(std::string("empty range for ") + name);
  };
  if (alphabet_size < 1) throw ConfigError("alphabet_size must be >= 1");
  if (glyph_size < 4) throw ConfigError("glyph_size must be >= 4");
  if (lines_min < 1) throw ConfigError("lines_min must be >= 1");
  if (chars_min < 1) throw ConfigError("chars_min must be >= 1");
  range(lines_min, lines_max, "lines");
  range(chars_min, chars_max, "chars");
  range(column_gap_min, column_gap_max, "column_gap");
  range(char_gap_min, char_gap_max, "char_gap");
  if (2 * column_gap_min < glyph_size) throw ConfigError("column_gap_min must be at least half the glyph size");
  if (jitter_x < 0 || jitter_y < 0 || noise_level < 0 || box_pad < 0 || margin < 0) {
    throw ConfigError("jitter, noise, pad and margin must be non-negative");
  }
}

bool InkMask::at(int x, int y) const {
  const int lx = x - x0;
  const int ly = y - y0;
  if (lx < 0 || ly < 0 || lx >= size || ly >= size) return false;
  return ink[static_cast<std::size_t>(ly * size + lx)] != 0;
}

Rect InkMask::bounds() const {
  Rect r{x0 + size, y0 + size, x0, y0};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!ink[static_cast<std::size_t>(y * size + x)]) continue;
      r.x0 = std::min(r.x0, x0 + x);
      r.y0 = std::min(r.y0, y0 + y);
      r.x1 = std::max(r.x1, x0 + x + 1);
      r.y1 = std::max(r.y1, y0 + y + 1);
    }
  }
  return r;
}

std::pair<double, double> InkMask::centroid() const {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!ink[static_cast<std::size_t>(y * size + x)]) continue;
      sx += x0 + x + 0.5;
      sy += y0 + y + 0.5;
      ++n;
    }
  }
  if (n == 0) return {x0 + 0.5 * size, y0 + 0.5 * size};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

CodepointMap alphabet_map(const std::vector<GlyphSpec>& alphabet) {
  CodepointMap map;
  for (const auto& g : alphabet) map.insert(g.codepoint, utf8_encode(g.codepoint));
  return map;
}

SynthPage gen_page(const CorpusParams& params, const std::vector<GlyphSpec>& alphabet, const std::string& image_id,
                   std::uint64_t page_seed) {
  params.validate();
  if (alphabet.empty()) throw ConfigError("gen_page: empty alphabet");
  Rng rng(page_seed);
  const int s = params.glyph_size;

  struct Placed {
    std::size_t glyph;
    int x, y;
  };
  std::vector<std::vector<Placed>> columns;
  const auto n_lines = rng.uniform_int(params.lines_min, params.lines_max);
  int col_right = params.page_width - params.margin;
  for (std::int64_t li = 0; li < n_lines; ++li) {
    if (li > 0) col_right -= static_cast<int>(rng.uniform_int(params.column_gap_min, params.column_gap_max));
    const int col_x = col_right - s;
    if (col_x - params.jitter_x < params.margin) {
      throw ConfigError("page too small: " + std::to_string(n_lines) + " columns do not fit in width " +
                        std::to_string(params.page_width));
    }
    std::vector<Placed> column;
    const auto n_chars = rng.uniform_int(params.chars_min, params.chars_max);
    int y = params.margin;
    for (std::int64_t ci = 0; ci < n_chars; ++ci) {
      if (ci > 0) y += s + static_cast<int>(rng.uniform_int(params.char_gap_min, params.char_gap_max));
      const int jx = static_cast<int>(rng.uniform_int(-params.jitter_x, params.jitter_x));
      const int jy = static_cast<int>(rng.uniform_int(-params.jitter_y, params.jitter_y));
      const auto glyph = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(alphabet.size()) - 1));
      const int gy = y + jy;
      if (gy < 0 || gy + s + params.jitter_y > params.page_height - params.margin + params.jitter_y) {
        throw ConfigError("page too small: " + std::to_string(n_chars) + " characters do not fit in height " +
                          std::to_string(params.page_height));
      }
      column.push_back({glyph, col_x + jx, gy});
    }
    columns.push_back(std::move(column));
    col_right = col_x;
  }

  SynthPage out;
  out.background = params.background;
  out.image = Raster(params.page_width, params.page_height, params.background);
  if (params.noise_level > 0) {
    auto& bytes = out.image.bytes();
    for (auto& v : bytes) {
      const int noisy = v + static_cast<int>(rng.uniform_int(-params.noise_level, params.noise_level));
      v = static_cast<std::uint8_t>(std::clamp(noisy, 0, 255));
    }
  }

  std::vector<GlyphBitmap> bitmaps;
  bitmaps.reserve(alphabet.size());
  for (const auto& g : alphabet) bitmaps.push_back(render_glyph(g, s));

  std::vector<CharBox> boxes;
  std::vector<InkMask> masks;
  std::vector<std::vector<std::size_t>> order;
  std::vector<std::string> line_texts;
  for (const auto& column : columns) {
    std::vector<std::size_t> line;
    std::string text;
    for (const auto& p : column) {
      InkMask mask{p.x, p.y, s, bitmaps[p.glyph].ink};
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if (mask.ink[static_cast<std::size_t>(y * s + x)]) out.image.set(p.x + x, p.y + y, params.ink);
        }
      }
      const Rect ink = mask.bounds();
      const int x0 = std::max(0, ink.x0 - params.box_pad);
      const int y0 = std::max(0, ink.y0 - params.box_pad);
      const int x1 = std::min(params.page_width, ink.x1 + params.box_pad);
      const int y1 = std::min(params.page_height, ink.y1 + params.box_pad);
      line.push_back(boxes.size());
      boxes.push_back({alphabet[p.glyph].codepoint, x0, y0, x1 - x0, y1 - y0});
      masks.push_back(std::move(mask));
      text += utf8_encode(alphabet[p.glyph].codepoint);
    }
    order.push_back(std::move(line));
    line_texts.push_back(std::move(text));
  }

  // Shuffle the source order; remap the reference order accordingly.
  std::vector<std::size_t> perm(boxes.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::size_t> new_index(boxes.size());
  out.page.image_id = image_id;
  out.page.width = params.page_width;
  out.page.height = params.page_height;
  for (std::size_t dst = 0; dst < perm.size(); ++dst) {
    out.page.boxes.push_back(boxes[perm[dst]]);
    out.masks.push_back(masks[perm[dst]]);
    new_index[perm[dst]] = dst;
  }
  for (auto& line : order) {
    for (auto& idx : line) idx = new_index[idx];
  }
  out.reading_order = std::move(order);
  out.transcript = make_transcript(std::move(line_texts));
  return out;
}

std::string page_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05zu", index);
  return buf;
}

SynthCorpus gen_corpus(const CorpusParams& params, std::size_t n_pages, std::size_t first_index) {
  if (n_pages < 1) throw ConfigError("gen_corpus: n_pages must be >= 1");
  params.validate();
  SynthCorpus corpus;
  corpus.alphabet = make_alphabet(params.alphabet_size, params.glyph_size, params.alphabet_seed);
  corpus.map = alphabet_map(corpus.alphabet);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_pages; ++i) {
    const std::string id = page_id(first_index + i);
    corpus.pages.push_back(gen_page(params, corpus.alphabet, id, params.seed ^ fnv1a64(id)));
    ids.push_back(id);
  }
  corpus.split = split_train_valid(ids, params.seed);
  return corpus;
}

std::string format_oracle(const std::vector<SynthPage>& pages, const std::vector<std::string>& metadata) {
  std::string out = "#kforge-oracle v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (const auto& p : pages) {
    out += p.page.image_id + '\t';
    for (std::size_t li = 0; li < p.reading_order.size(); ++li) {
      if (li) out += '|';
      for (std::size_t k = 0; k < p.reading_order[li].size(); ++k) {
        if (k) out += ',';
        out += std::to_string(p.reading_order[li][k]);
      }
    }
    out += '\t';
    for (std::size_t i = 0; i < p.masks.size(); ++i) {
      if (i) out += ',';
      const Rect r = p.masks[i].bounds();
      out += std::to_string(r.x0) + ':' + std::to_string(r.y0) + ':' + std::to_string(r.x1) + ':' +
             std::to_string(r.y1);
    }
    out += '\n';
  }
  return out;
}

void write_corpus(const SynthCorpus& corpus, const std::string& dir, const std::vector<std::string>& metadata) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::vector<PageAnnotation> pages;
  for (const auto& p : corpus.pages) {
    write_png((fs::path(dir) / "images" / (p.page.image_id + ".png")).string(), p.image);
    pages.push_back(p.page);
  }
  write_file((fs::path(dir) / "train.csv").string(), format_annotation_table(pages));
  std::string map_text = "Unicode,char\n";
  for (const auto& [cp, text] : corpus.map.entries()) map_text += format_codepoint(cp) + "," + text + "\n";
  write_file((fs::path(dir) / "unicode_translation.csv").string(), map_text);
  save_pages((fs::path(dir) / "pages.txt").string(), pages, metadata);
  write_file((fs::path(dir) / "split.txt").string(), format_split(corpus.split, metadata));
  write_file((fs::path(dir) / "oracle.txt").string(), format_oracle(corpus.pages, metadata));
}

}  // namespace kforge::synth
