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
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kforge/image.hpp"
#include "kforge/util.hpp"

namespace kforge {

/// One annotated character: a codepoint and its pixel rectangle [x, x+w) × [y, y+h).
struct CharBox {
  char32_t codepoint = 0;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }

  friend bool operator==(const CharBox&, const CharBox&) = default;
};

struct PageAnnotation {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<CharBox> boxes;  // source order

  friend bool operator==(const PageAnnotation&, const PageAnnotation&) = default;
};

/// Codepoint -> display character table (the competition's unicode translation file).
class CodepointMap {
 public:
  void insert(char32_t cp, std::string text) { entries_[cp] = std::move(text); }
  bool contains(char32_t cp) const { return entries_.contains(cp); }
  /// Throws Error naming the codepoint when it is absent.
  const std::string& at(char32_t cp) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<char32_t, std::string>& entries() const { return entries_; }

 private:
  std::map<char32_t, std::string> entries_;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::uint64_t seed = 0;
};

using SizeLookup = std::function<ImageSize(const std::string& image_id)>;

/// Parses an `image_id,labels` table. Each labels cell holds space-separated
/// `U+XXXX x y w h` groups. Boxes overflowing the page are clipped with a
/// warning; boxes entirely outside are dropped with a warning.
std::vector<PageAnnotation> parse_annotation_table(std::string_view csv_text, const SizeLookup& size_of,
                                                   Diagnostics* diag = nullptr);

/// parse_annotation_table over a file, looking up `<image_dir>/<image_id>.png|.jpg` for page sizes.
std::vector<PageAnnotation> parse_dataset(const std::string& annotation_file, const std::string& image_dir,
                                          Diagnostics* diag = nullptr);

/// Finds the image file for an id (png first, then jpg/jpeg). Throws LoadError if none exists.
std::string find_page_image(const std::string& image_dir, const std::string& image_id);

CodepointMap parse_codepoint_map(std::string_view csv_text, Diagnostics* diag = nullptr);
CodepointMap load_codepoint_map(const std::string& path, Diagnostics* diag = nullptr);

/// Seeded shuffle, then the last floor(N/10) ids (at least one when N >= 2)
/// become the validation side.
DatasetSplit split_train_valid(const std::vector<std::string>& ids, std::uint64_t seed);

/// Canonical `#kforge-pages v1` serialization. Metadata lines (`#key=value`)
/// may follow the header and are ignored by the reader.
std::string format_pages(const std::vector<PageAnnotation>& pages,
                         const std::vector<std::string>& metadata = {});
std::vector<PageAnnotation> parse_pages(std::string_view text);
void save_pages(const std::string& path, const std::vector<PageAnnotation>& pages,
                const std::vector<std::string>& metadata = {});
std::vector<PageAnnotation> load_pages(const std::string& path);

/// `#kforge-split v1`: a `#seed=N` line, then `train<TAB>id` / `valid<TAB>id` records.
std::string format_split(const DatasetSplit& split, const std::vector<std::string>& metadata = {});
DatasetSplit parse_split(std::string_view text);
DatasetSplit load_split(const std::string& path);

/// Competition-style `image_id,labels` table text for a set of pages (inverse of parse_annotation_table).
std::string format_annotation_table(const std::vector<PageAnnotation>& pages);

}  // namespace kforge
