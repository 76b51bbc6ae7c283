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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "kforge/annotation.hpp"
#include "kforge/error.hpp"
#include "kforge/image.hpp"
#include "kforge/rng.hpp"

using namespace kforge;

namespace {

SizeLookup fixed_size(int w, int h) {
  return [w, h](const std::string&) { return ImageSize{w, h}; };
}

std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("page" + std::to_string(i));
  return ids;
}

// Independent Fisher-Yates over mt19937_64 with rejection sampling.
std::vector<std::string> oracle_shuffle(std::vector<std::string> v, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t span = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t d = eng();
    while (d >= limit) d = eng();
    std::swap(v[i - 1], v[d % span]);
  }
  return v;
}

std::vector<PageAnnotation> random_pages(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<PageAnnotation> pages;
  for (int i = 0; i < n; ++i) {
    PageAnnotation p;
    p.image_id = "img_" + std::to_string(rng.next_u64() % 100000);
    p.width = static_cast<int>(rng.uniform_int(50, 500));
    p.height = static_cast<int>(rng.uniform_int(50, 500));
    const auto boxes = rng.uniform_int(0, 20);
    for (int b = 0; b < boxes; ++b) {
      CharBox box;
      box.codepoint = static_cast<char32_t>(rng.uniform_int(0x3041, 0x9FFF));
      box.w = static_cast<int>(rng.uniform_int(1, 30));
      box.h = static_cast<int>(rng.uniform_int(1, 30));
      box.x = static_cast<int>(rng.uniform_int(0, p.width - box.w));
      box.y = static_cast<int>(rng.uniform_int(0, p.height - box.h));
      p.boxes.push_back(box);
    }
    pages.push_back(p);
  }
  return pages;
}

}  // namespace

TEST_CASE("annotation table rows map onto boxes") {
  Diagnostics diag;
  diag.echo = false;
  const auto pages =
      parse_annotation_table("image_id,labels\np1,\"U+304B 10 20 30 40\"\np2,\"\"\np3,\n", fixed_size(100, 200), &diag);
  REQUIRE(pages.size() == 3);
  CHECK(pages[0].image_id == "p1");
  CHECK(pages[0].width == 100);
  CHECK(pages[0].height == 200);
  REQUIRE(pages[0].boxes.size() == 1);
  CHECK(pages[0].boxes[0] == CharBox{0x304B, 10, 20, 30, 40});
  CHECK(pages[1].boxes.empty());
  CHECK(pages[2].boxes.empty());
  CHECK(diag.warnings.empty());
}

TEST_CASE("annotation table errors") {
  Diagnostics diag;
  diag.echo = false;
  const auto sz = fixed_size(100, 100);
  CHECK_THROWS_AS(parse_annotation_table("image_id,labels\np1,U+304B 1 2 3\n", sz, &diag), ParseError);
  CHECK_THROWS_AS(parse_annotation_table("image_id,labels\np1,U+304B 1 2 x 4\n", sz, &diag), ParseError);
  CHECK_THROWS_AS(parse_annotation_table("image_id,labels\np1,304B 1 2 3 4\n", sz, &diag), ParseError);
  CHECK_THROWS_AS(parse_annotation_table("id,stuff\np1,\n", sz, &diag), ParseError);
  try {
    parse_annotation_table("image_id,labels\nok,\nbad_row,U+304B 1 2\n", sz, &diag);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad_row") != std::string::npos);
  }
}

TEST_CASE("overflowing boxes are clipped and outside boxes dropped") {
  Diagnostics diag;
  diag.echo = false;
  const auto pages = parse_annotation_table(
      "image_id,labels\np,U+3042 90 90 20 20 U+3044 200 5 10 10 U+3046 -5 0 10 10\n", fixed_size(100, 100), &diag);
  REQUIRE(pages[0].boxes.size() == 2);
  CHECK(pages[0].boxes[0] == CharBox{0x3042, 90, 90, 10, 10});
  CHECK(pages[0].boxes[1] == CharBox{0x3046, 0, 0, 5, 10});
  CHECK(diag.warnings.size() == 3);
}

TEST_CASE("clipped boxes keep positive area") {
  Diagnostics diag;
  diag.echo = false;
  Rng rng(3);
  std::string table = "image_id,labels\np,";
  for (int i = 0; i < 300; ++i) {
    table += "U+3042 " + std::to_string(rng.uniform_int(-60, 140)) + " " + std::to_string(rng.uniform_int(-60, 140)) +
             " " + std::to_string(rng.uniform_int(1, 60)) + " " + std::to_string(rng.uniform_int(1, 60)) + " ";
  }
  table.pop_back();
  table += "\n";
  const auto pages = parse_annotation_table(table, fixed_size(100, 80), &diag);
  for (const auto& b : pages[0].boxes) {
    CHECK(b.w >= 1);
    CHECK(b.h >= 1);
    CHECK(b.x >= 0);
    CHECK(b.y >= 0);
    CHECK(b.x + b.w <= 100);
    CHECK(b.y + b.h <= 80);
  }
}

TEST_CASE("dataset parse needs the page images") {
  const auto dir = std::filesystem::temp_directory_path() / "kforge_test_annotation";
  std::filesystem::create_directories(dir / "images");
  write_png((dir / "images" / "a.png").string(), Raster(40, 30));
  write_file((dir / "train.csv").string(), "image_id,labels\na,U+3042 1 1 5 5\n");
  const auto pages = parse_dataset((dir / "train.csv").string(), (dir / "images").string());
  REQUIRE(pages.size() == 1);
  CHECK(pages[0].width == 40);
  CHECK(pages[0].height == 30);
  write_file((dir / "train.csv").string(), "image_id,labels\nmissing,\n");
  CHECK_THROWS_AS(parse_dataset((dir / "train.csv").string(), (dir / "images").string()), LoadError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("codepoint map") {
  Diagnostics diag;
  diag.echo = false;
  auto map = parse_codepoint_map("Unicode,char\nU+3042,あ\n", &diag);
  CHECK(map.at(0x3042) == "あ");
  CHECK(parse_codepoint_map("", &diag).size() == 0);
  CHECK_THROWS_AS(map.at(0x3044), Error);
  map = parse_codepoint_map("Unicode,char\nU+3042,あ\nU+3042,ア\n", &diag);
  CHECK(map.size() == 1);
  CHECK(map.at(0x3042) == "ア");
  CHECK(diag.warnings.size() == 1);
  CHECK_THROWS_AS(parse_codepoint_map("Unicode,char\nX3042,あ\n", &diag), ParseError);
}

TEST_CASE("split sizes follow the floor rule") {
  const auto s = split_train_valid(make_ids(3881), 7);
  CHECK(s.train.size() == 3493);
  CHECK(s.valid.size() == 388);
  const auto t = split_train_valid(make_ids(10), 7);
  CHECK(t.train.size() == 9);
  CHECK(t.valid.size() == 1);
  CHECK_THROWS_AS(split_train_valid({"a", "a"}, 1), Error);
  CHECK_THROWS_AS(split_train_valid({}, 1), Error);
}

TEST_CASE("split of five ids matches an independent shuffle") {
  const auto ids = make_ids(5);
  std::set<std::vector<std::string>> memberships;
  for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    const auto s = split_train_valid(ids, seed);
    const auto order = oracle_shuffle(ids, seed);
    CHECK(s.train.size() == 4);
    REQUIRE(s.valid.size() == 1);
    CHECK(s.valid[0] == order[4]);
    CHECK(s.train == std::vector<std::string>(order.begin(), order.begin() + 4));
    memberships.insert(s.valid);
  }
  CHECK(memberships.size() > 1);
}

TEST_CASE("split is a deterministic partition") {
  for (int n = 1; n < 60; n += 7) {
    const auto ids = make_ids(n);
    const auto a = split_train_valid(ids, 11);
    const auto b = split_train_valid(ids, 11);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    std::multiset<std::string> all(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    CHECK(all == std::multiset<std::string>(ids.begin(), ids.end()));
    CHECK(a.valid.size() == (n >= 2 ? std::max<std::size_t>(1, n / 10) : 0));
  }
}

TEST_CASE("split file round trip") {
  const auto s = split_train_valid(make_ids(23), 42);
  const auto back = parse_split(format_split(s, {"config_hash=abc"}));
  CHECK(back.train == s.train);
  CHECK(back.valid == s.valid);
  CHECK(back.seed == 42);
  CHECK_THROWS_AS(parse_split("#kforge-split v2\n"), FormatError);
}

TEST_CASE("pages round trip bit-exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pages = random_pages(seed, static_cast<int>(seed % 6));
    const auto text = format_pages(pages, {"seed=1"});
    CHECK(parse_pages(text) == pages);
    CHECK(format_pages(parse_pages(text), {"seed=1"}) == text);
  }
  CHECK(format_pages({}) == "#kforge-pages v1\n");
  CHECK(parse_pages(format_pages({})).empty());
}

TEST_CASE("parse-serialize-parse is a fixpoint for the competition table") {
  Diagnostics diag;
  diag.echo = false;
  const auto pages = random_pages(99, 8);
  std::map<std::string, ImageSize> sizes;
  for (const auto& p : pages) sizes[p.image_id] = {p.width, p.height};
  const SizeLookup lookup = [&](const std::string& id) { return sizes.at(id); };
  const auto once = parse_annotation_table(format_annotation_table(pages), lookup, &diag);
  const auto twice = parse_pages(format_pages(once));
  CHECK(once == twice);
}

TEST_CASE("pages file errors fail closed") {
  try {
    parse_pages("#kforge-pages v9\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("v1") != std::string::npos);
    CHECK(msg.find("v9") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_pages("#kforge-pages v1\np\tx10\t20\t\n"), FormatError);
  CHECK_THROWS_AS(parse_pages("#kforge-pages v1\np\t10\t20\t\nq\t1\t1\t"), FormatError);
  CHECK_THROWS_AS(parse_pages("#kforge-pages v1\np\t10\t20\tU+3042:1:2:3\n"), FormatError);
  CHECK_THROWS_AS(parse_pages(""), FormatError);

  const auto dir = std::filesystem::temp_directory_path() / "kforge_test_pages";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "p.txt").string();
  const auto pages = random_pages(5, 3);
  save_pages(path, pages);
  CHECK(load_pages(path) == pages);
  std::filesystem::remove_all(dir);
}
