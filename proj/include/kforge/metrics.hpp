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

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kforge/annotation.hpp"

namespace kforge {

/// Unit-cost Levenshtein distance over arbitrary symbol sequences.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  const std::size_t n = b.size();
  std::vector<std::size_t> row(n + 1);
  for (std::size_t j = 0; j <= n; ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[n];
}

/// Index pairs (i, j) with a[i] == b[j] kept as matches by one minimum-cost
/// edit script (backtrace prefers match/substitution, then deletion).
template <typename Seq>
std::vector<std::pair<std::size_t, std::size_t>> aligned_matches(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1, at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
    if (at(i, j) == at(i - 1, j - 1) + cost) {
      if (cost == 0) out.emplace_back(i - 1, j - 1);
      --i;
      --j;
    } else if (at(i, j) == at(i - 1, j) + 1) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// Distance between two UTF-8 strings, counted in codepoints.
std::size_t edit_distance_utf8(std::string_view a, std::string_view b);

struct EvalPair {
  std::string target;      // reference transcript s
  std::string hypothesis;  // system output h(I)
};

struct CrrOptions {
  /// Use 100 - ΣED/Z instead of the percentage form 100·(1 - ΣED/Z).
  bool literal = false;
  /// Count the line separator as a scoreable character.
  bool include_separator = true;
};

struct CrrTotals {
  std::size_t edits = 0;
  std::size_t reference_chars = 0;  // Z
};

CrrTotals crr_totals(const std::vector<EvalPair>& pairs, const CrrOptions& options = {});
/// Character recognition rate in percent. Throws Error when Z == 0.
double crr(const std::vector<EvalPair>& pairs, const CrrOptions& options = {});
double crr_from_totals(const CrrTotals& totals, const CrrOptions& options = {});

struct PointPrediction {
  char32_t codepoint = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PointPrediction&, const PointPrediction&) = default;
};

/// Point inside box, edges inclusive: x ∈ [box.x, box.x + w], y ∈ [box.y, box.y + h].
bool point_in_box(const PointPrediction& p, const CharBox& box);

using Matching = std::vector<std::pair<std::size_t, std::size_t>>;  // (prediction, gt)

/// Greedy one-to-one matching: predictions in input order each take the
/// first unmatched gt box (in input order) of the same class containing the point.
Matching match_predictions(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt);

struct DetectionScores {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t ground_truth = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

DetectionScores detection_scores_from_counts(std::size_t matched, std::size_t predicted, std::size_t ground_truth);
DetectionScores detection_scores(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt);

/// The two failure modes seen when locating characters by attention.
struct LocationErrors {
  std::size_t wrong_class_right_place = 0;  // point inside a gt box of another class
  std::size_t right_class_wrong_place = 0;  // class present on the page, point outside all its boxes
  std::size_t other = 0;
};

LocationErrors classify_unmatched(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt,
                                  const Matching& matching);

struct ReportRow {
  std::string id;
  std::size_t edits = 0;
  std::size_t reference_chars = 0;
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t ground_truth = 0;
};

struct EvalReport {
  double crr = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ReportRow> rows;
  LocationErrors errors;
};

/// Aggregates per-page rows (CRR from edit counts, detection from match counts).
EvalReport aggregate_report(std::vector<ReportRow> rows, const CrrOptions& options = {});

std::string format_report_table(const EvalReport& report);
/// `#kforge-report v1` records: one `page` line per row plus a `total` line.
std::string format_report_records(const EvalReport& report, const std::vector<std::string>& metadata = {});

/// Competition submission: `image_id,labels` with `U+XXXX x y` triples.
using Submission = std::vector<std::pair<std::string, std::vector<PointPrediction>>>;
std::string format_submission(const Submission& submission);
Submission parse_submission(std::string_view csv_text);

}  // namespace kforge
