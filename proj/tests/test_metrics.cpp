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

#include <random>

#include "kforge/error.hpp"
#include "kforge/metrics.hpp"
#include "kforge/rng.hpp"
#include "oracles.hpp"

using namespace kforge;

namespace {

std::string random_word(Rng& rng, int max_len, int alphabet) {
  std::string s(static_cast<std::size_t>(rng.uniform_int(0, max_len)), 'a');
  for (auto& c : s) c = static_cast<char>('a' + rng.uniform_int(0, alphabet - 1));
  return s;
}

CharBox box(char32_t cp, int x, int y, int w, int h) { return {cp, x, y, w, h}; }

}  // namespace

TEST_CASE("edit distance basics") {
  CHECK(edit_distance(std::string(""), std::string("abc")) == 3);
  CHECK(edit_distance(std::string("abc"), std::string("abc")) == 0);
  CHECK(edit_distance(std::string("abcd"), std::string("abcx")) == 1);
  CHECK(edit_distance(std::string("kitten"), std::string("sitting")) == 3);
  CHECK(edit_distance_utf8("あい", "あう") == 1);
  CHECK(edit_distance_utf8("あい", "") == 2);
}

TEST_CASE("edit distance equals the memoised recursive oracle") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_word(rng, 12, 5), b = random_word(rng, 12, 5);
    REQUIRE(edit_distance(a, b) == oracle::edit_distance(a, b));
  }
}

TEST_CASE("edit distance is a metric") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_word(rng, 10, 4), b = random_word(rng, 10, 4), c = random_word(rng, 10, 4);
    const auto ab = edit_distance(a, b);
    CHECK(ab == edit_distance(b, a));
    CHECK((ab == 0) == (a == b));
    CHECK(ab <= edit_distance(a, c) + edit_distance(c, b));
    CHECK(ab <= std::max(a.size(), b.size()));
    CHECK(ab >= (a.size() > b.size() ? a.size() - b.size() : b.size() - a.size()));
  }
}

TEST_CASE("aligned matches are equal symbols in increasing order") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_word(rng, 10, 3), b = random_word(rng, 10, 3);
    const auto m = aligned_matches(a, b);
    for (std::size_t k = 0; k < m.size(); ++k) {
      CHECK(a[m[k].first] == b[m[k].second]);
      if (k) {
        CHECK(m[k].first > m[k - 1].first);
        CHECK(m[k].second > m[k - 1].second);
      }
    }
    // An optimal script keeps at least max(|a|,|b|) - ED matches.
    CHECK(m.size() + edit_distance(a, b) >= std::max(a.size(), b.size()));
  }
}

TEST_CASE("CRR") {
  CHECK(crr({{"あい", "あい"}}) == 100.0);
  CHECK(crr({{"abcd", "abcx"}}) == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(crr({{"ab", "ab"}, {"cd", "ce"}}) == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(crr({{"abcd", "abcx"}, {"ab", "ab"}}) == doctest::Approx(100.0 * (1.0 - 1.0 / 6.0)).epsilon(1e-12));
  CHECK(crr({{"ab", "xxxxxx"}}) < 0.0);
  CHECK_THROWS_AS(crr({{"", "abc"}}), Error);
  CHECK_THROWS_AS(crr({}), Error);

  CrrOptions literal;
  literal.literal = true;
  CHECK(crr({{"abcd", "abcx"}}, literal) == doctest::Approx(100.0 - 0.25));

  CrrOptions no_sep;
  no_sep.include_separator = false;
  const auto t = crr_totals({{"ab\ncd", "abcd"}}, no_sep);
  CHECK(t.edits == 0);
  CHECK(t.reference_chars == 4);
  const auto with = crr_totals({{"ab\ncd", "abcd"}});
  CHECK(with.edits == 1);
  CHECK(with.reference_chars == 5);
}

TEST_CASE("CRR properties") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    std::vector<EvalPair> pairs;
    for (int k = 0; k < 4; ++k) {
      auto s = random_word(rng, 8, 4);
      if (s.empty()) s = "a";
      pairs.push_back({s, random_word(rng, 8, 4)});
    }
    const double before = crr(pairs);
    pairs.push_back({"abc", "abc"});
    CHECK(crr(pairs) >= before - 1e-12);
    std::vector<EvalPair> same;
    for (const auto& p : pairs) same.push_back({p.target, p.target});
    CHECK(crr(same) == 100.0);
  }
}

TEST_CASE("point matching") {
  const std::vector<CharBox> one{box(0x3042, 10, 10, 10, 10)};
  CHECK(match_predictions({{0x3042, 15, 15}}, one).size() == 1);
  CHECK(match_predictions({{0x3042, 15, 15}, {0x3042, 16, 16}}, one).size() == 1);
  CHECK(match_predictions({{0x3044, 15, 15}}, one).empty());
  CHECK(match_predictions({{0x3042, 20, 20}}, one).size() == 1);  // edges inclusive
  CHECK(match_predictions({{0x3042, 20.5, 20}}, one).empty());
  CHECK(match_predictions({}, one).empty());
  CHECK(match_predictions({{0x3042, 15, 15}}, {}).empty());

  // Greedy takes the first qualifying box in input order.
  const std::vector<CharBox> two{box(1, 0, 0, 10, 10), box(1, 5, 5, 10, 10)};
  const auto m = match_predictions({{1, 7, 7}, {1, 3, 3}}, two);
  REQUIRE(m.size() == 1);
  CHECK(m[0] == std::make_pair<std::size_t, std::size_t>(0, 0));
}

TEST_CASE("greedy matching never beats the exhaustive oracle") {
  Rng rng(5);
  int equal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<CharBox> gt;
    std::vector<PointPrediction> preds;
    const auto ng = rng.uniform_int(0, 8), np = rng.uniform_int(0, 8);
    for (int i = 0; i < ng; ++i) {
      gt.push_back(box(static_cast<char32_t>(rng.uniform_int(1, 2)), static_cast<int>(rng.uniform_int(0, 30)),
                       static_cast<int>(rng.uniform_int(0, 30)), static_cast<int>(rng.uniform_int(4, 15)),
                       static_cast<int>(rng.uniform_int(4, 15))));
    }
    for (int i = 0; i < np; ++i) {
      preds.push_back({static_cast<char32_t>(rng.uniform_int(1, 2)), rng.uniform(0, 40), rng.uniform(0, 40)});
    }
    const auto greedy = match_predictions(preds, gt).size();
    const auto best = oracle::max_matching(preds, gt);
    REQUIRE(greedy <= best);
    CHECK(greedy <= std::min(preds.size(), gt.size()));
    equal += greedy == best;
  }
  CHECK(equal >= 475);
}

TEST_CASE("detection scores") {
  const auto s = detection_scores_from_counts(8, 10, 12);
  CHECK(s.precision == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(s.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(s.f1 - 8.0 / 11.0) <= 1e-12);

  const std::vector<CharBox> gt{box(1, 0, 0, 10, 10), box(2, 20, 0, 10, 10)};
  const auto perfect = detection_scores({{1, 5, 5}, {2, 25, 5}}, gt);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto none = detection_scores({}, gt);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  const auto empty = detection_scores({}, {});
  CHECK(empty.f1 == 0.0);
}

TEST_CASE("unmatched predictions are sorted into the two failure modes") {
  const std::vector<CharBox> gt{box(1, 0, 0, 10, 10), box(2, 20, 0, 10, 10)};
  const std::vector<PointPrediction> preds{{1, 5, 5}, {2, 5, 5}, {2, 50, 50}, {3, 50, 50}};
  const auto m = match_predictions(preds, gt);
  const auto e = classify_unmatched(preds, gt, m);
  CHECK(m.size() == 1);
  CHECK(e.wrong_class_right_place == 1);
  CHECK(e.right_class_wrong_place == 1);
  CHECK(e.other == 1);
}

TEST_CASE("report aggregation sums page rows") {
  std::vector<ReportRow> rows{{"a", 1, 4, 3, 4, 5}, {"b", 0, 2, 2, 2, 2}};
  const auto r = aggregate_report(rows);
  CHECK(r.crr == doctest::Approx(100.0 * (1.0 - 1.0 / 6.0)));
  CHECK(r.precision == doctest::Approx(5.0 / 6.0));
  CHECK(r.recall == doctest::Approx(5.0 / 7.0));
  const auto text = format_report_records(r, {"seed=1"});
  CHECK(text.rfind("#kforge-report v1\n#seed=1\n", 0) == 0);
  CHECK(format_report_table(r).find("CRR 83.33") != std::string::npos);
}

TEST_CASE("submission round trip") {
  Submission sub{{"p1", {{0x304B, 10.4, 20.6}, {0x3042, 0, 0}}}, {"p2", {}}};
  const auto text = format_submission(sub);
  CHECK(text == "image_id,labels\np1,U+304B 10 21 U+3042 0 0\np2,\n");
  const auto back = parse_submission(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].second.size() == 2);
  CHECK(back[0].second[0].x == 10.0);
  CHECK(back[1].second.empty());
}
