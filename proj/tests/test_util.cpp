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

#include <atomic>
#include <filesystem>

#include "kforge/csv.hpp"
#include "kforge/error.hpp"
#include "kforge/image.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

using namespace kforge;

TEST_CASE("utf8 round trip") {
  const std::u32string s = U"aあ\U0001F600\n";
  CHECK(utf8_decode(utf8_encode(s)) == s);
  CHECK(utf8_encode(U'か') == "か");
  CHECK_THROWS_AS(utf8_decode("\xff"), ParseError);
  CHECK_THROWS_AS(utf8_decode("\xe3\x81"), ParseError);
}

TEST_CASE("codepoint tokens") {
  CHECK(parse_codepoint("U+304B") == 0x304B);
  CHECK(parse_codepoint("U+2000B") == 0x2000B);
  CHECK(format_codepoint(0x304B) == "U+304B");
  CHECK(format_codepoint(0xE000) == "U+E000");
  CHECK(format_codepoint(0x41) == "U+0041");
  CHECK_THROWS_AS(parse_codepoint("304B"), ParseError);
  CHECK_THROWS_AS(parse_codepoint("U+"), ParseError);
  CHECK_THROWS_AS(parse_codepoint("U+XYZ"), ParseError);
}

TEST_CASE("hex floats round trip exactly") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform_int(-20, 20));
    CHECK(parse_hexfloat(format_hexfloat(v)) == v);
  }
}

TEST_CASE("rng is reproducible and in range") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.uniform_int(-3, 3);
    CHECK(k >= -3);
    CHECK(k <= 3);
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("csv parsing handles quotes and CRLF") {
  const auto rows = parse_csv("image_id,labels\r\np1,\"U+304B 1 2 3 4\"\r\n\"p,2\",\"a \"\"q\"\"\"\n\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].fields[1] == "U+304B 1 2 3 4");
  CHECK(rows[2].fields[0] == "p,2");
  CHECK(rows[2].fields[1] == "a \"q\"");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("plain") == "plain");
}

TEST_CASE("field escaping") {
  CHECK(escape_field("a\nb\tc\\") == "a\\nb\\tc\\\\");
  CHECK(unescape_field(escape_field("x\n\\n\t")) == "x\n\\n\t");
  CHECK_THROWS_AS(unescape_field("a\\"), ParseError);
  CHECK_THROWS_AS(unescape_field("a\\q"), ParseError);
}

TEST_CASE("parallel_for visits every index once and rethrows the first failure") {
  for (const int jobs : {1, 3}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, jobs, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
    try {
      parallel_for(20, jobs, [](std::size_t i) {
        if (i == 7 || i == 12) throw Error("fail " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(std::string(e.what()) == "fail 7");
    }
  }
}

TEST_CASE("png round trip and dimension lookup") {
  const auto dir = std::filesystem::temp_directory_path() / "kforge_test_util";
  std::filesystem::create_directories(dir);
  Raster img(7, 5, {10, 20, 30});
  img.set(3, 2, {200, 100, 0});
  const auto path = (dir / "x.png").string();
  write_png(path, img);
  CHECK(read_image(path) == img);
  const auto size = image_dimensions(path);
  CHECK(size.width == 7);
  CHECK(size.height == 5);
  CHECK_THROWS_AS(read_image((dir / "missing.png").string()), LoadError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bilinear sampling and blur") {
  Raster img(2, 1, {0, 0, 0});
  img.set(1, 0, {100, 100, 100});
  auto c = sample_bilinear(img, 1.0, 0.5, {255, 255, 255});
  CHECK(c[0] == doctest::Approx(50.0));
  c = sample_bilinear(img, 0.5, 0.5, {255, 255, 255});
  CHECK(c[0] == doctest::Approx(0.0));
  c = sample_bilinear(img, -5.0, 0.5, {255, 255, 255});
  CHECK(c[0] == doctest::Approx(255.0));

  std::vector<double> field(25, 0.0);
  field[12] = 1.0;
  const auto blurred = gaussian_blur(field, 5, 5, 1.0);
  double sum = 0.0, peak = 0.0;
  for (const double v : blurred) {
    sum += v;
    peak = std::max(peak, v);
  }
  CHECK(peak == blurred[12]);
  CHECK(sum <= 1.0 + 1e-12);
  const auto flat = gaussian_blur(std::vector<double>(25, 3.0), 5, 5, 2.0);
  for (const double v : flat) CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("crop copies the rectangle") {
  Raster img(4, 4);
  img.set(2, 3, {1, 2, 3});
  const auto c = img.crop(1, 2, 2, 2);
  CHECK(c.width() == 2);
  CHECK(c.height() == 2);
  CHECK(c.at(1, 1) == Rgb{1, 2, 3});
}
