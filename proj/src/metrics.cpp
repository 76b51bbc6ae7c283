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

#include "kforge/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "kforge/csv.hpp"
#include "kforge/error.hpp"
#include "kforge/util.hpp"

namespace kforge {

std::size_t edit_distance_utf8(std::string_view a, std::string_view b) {
  return edit_distance(utf8_decode(a), utf8_decode(b));
}

namespace {

std::u32string scoreable(std::string_view text, const CrrOptions& options) {
  std::u32string out = utf8_decode(text);
  if (!options.include_separator) std::erase(out, U'\n');
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

CrrTotals crr_totals(const std::vector<EvalPair>& pairs, const CrrOptions& options) {
  CrrTotals totals;
  for (const auto& pair : pairs) {
    const auto s = scoreable(pair.target, options);
    const auto h = scoreable(pair.hypothesis, options);
    totals.edits += edit_distance(s, h);
    totals.reference_chars += s.size();
  }
  return totals;
}

double crr_from_totals(const CrrTotals& totals, const CrrOptions& options) {
  if (totals.reference_chars == 0) throw Error("CRR undefined: the reference set has no characters (Z = 0)");
  const double ratio = static_cast<double>(totals.edits) / static_cast<double>(totals.reference_chars);
  return options.literal ? 100.0 - ratio : 100.0 * (1.0 - ratio);
}

double crr(const std::vector<EvalPair>& pairs, const CrrOptions& options) {
  return crr_from_totals(crr_totals(pairs, options), options);
}

bool point_in_box(const PointPrediction& p, const CharBox& box) {
  return p.x >= box.x && p.x <= box.x + box.w && p.y >= box.y && p.y <= box.y + box.h;
}

Matching match_predictions(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt) {
  Matching matching;
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t pi = 0; pi < preds.size(); ++pi) {
    for (std::size_t gi = 0; gi < gt.size(); ++gi) {
      if (taken[gi] || gt[gi].codepoint != preds[pi].codepoint || !point_in_box(preds[pi], gt[gi])) continue;
      taken[gi] = true;
      matching.emplace_back(pi, gi);
      break;
    }
  }
  return matching;
}

DetectionScores detection_scores_from_counts(std::size_t matched, std::size_t predicted, std::size_t ground_truth) {
  DetectionScores s{matched, predicted, ground_truth, 0.0, 0.0, 0.0};
  if (predicted > 0) s.precision = static_cast<double>(matched) / static_cast<double>(predicted);
  if (ground_truth > 0) s.recall = static_cast<double>(matched) / static_cast<double>(ground_truth);
  if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

DetectionScores detection_scores(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt) {
  return detection_scores_from_counts(match_predictions(preds, gt).size(), preds.size(), gt.size());
}

LocationErrors classify_unmatched(const std::vector<PointPrediction>& preds, const std::vector<CharBox>& gt,
                                  const Matching& matching) {
  std::vector<bool> pred_matched(preds.size(), false);
  std::vector<bool> gt_matched(gt.size(), false);
  for (const auto& [p, g] : matching) {
    pred_matched[p] = true;
    gt_matched[g] = true;
  }
  LocationErrors errors;
  for (std::size_t pi = 0; pi < preds.size(); ++pi) {
    if (pred_matched[pi]) continue;
    const auto& p = preds[pi];
    bool inside_other = false;
    bool class_present = false;
    for (std::size_t gi = 0; gi < gt.size(); ++gi) {
      if (gt[gi].codepoint != p.codepoint && point_in_box(p, gt[gi])) inside_other = true;
      if (!gt_matched[gi] && gt[gi].codepoint == p.codepoint) class_present = true;
    }
    if (inside_other) ++errors.wrong_class_right_place;
    else if (class_present) ++errors.right_class_wrong_place;
    else ++errors.other;
  }
  return errors;
}

EvalReport aggregate_report(std::vector<ReportRow> rows, const CrrOptions& options) {
  EvalReport report;
  CrrTotals totals;
  std::size_t matched = 0, predicted = 0, gt = 0;
  for (const auto& r : rows) {
    totals.edits += r.edits;
    totals.reference_chars += r.reference_chars;
    matched += r.matched;
    predicted += r.predicted;
    gt += r.ground_truth;
  }
  if (totals.reference_chars > 0) report.crr = crr_from_totals(totals, options);
  const auto det = detection_scores_from_counts(matched, predicted, gt);
  report.precision = det.precision;
  report.recall = det.recall;
  report.f1 = det.f1;
  report.rows = std::move(rows);
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "id                        ED     |s|  matched  predicted  gt\n";
  for (const auto& r : report.rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %5zu %7zu %8zu %10zu %4zu\n", r.id.c_str(), r.edits, r.reference_chars,
                  r.matched, r.predicted, r.ground_truth);
    out << buf;
  }
  out << "CRR " << fixed(report.crr, 2) << "  P " << fixed(report.precision, 4) << "  R " << fixed(report.recall, 4)
      << "  F1 " << fixed(report.f1, 4) << '\n';
  return out.str();
}

std::string format_report_records(const EvalReport& report, const std::vector<std::string>& metadata) {
  std::string out = "#kforge-report v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (const auto& r : report.rows) {
    out += "page\t" + r.id + '\t' + std::to_string(r.edits) + '\t' + std::to_string(r.reference_chars) + '\t' +
           std::to_string(r.matched) + '\t' + std::to_string(r.predicted) + '\t' + std::to_string(r.ground_truth) +
           '\n';
  }
  out += "total\tcrr=" + fixed(report.crr, 6) + "\tprecision=" + fixed(report.precision, 6) +
         "\trecall=" + fixed(report.recall, 6) + "\tf1=" + fixed(report.f1, 6) +
         "\twrong_class_right_place=" + std::to_string(report.errors.wrong_class_right_place) +
         "\tright_class_wrong_place=" + std::to_string(report.errors.right_class_wrong_place) + '\n';
  return out;
}

std::string format_submission(const Submission& submission) {
  std::string out = "image_id,labels\n";
  for (const auto& [id, preds] : submission) {
    std::string labels;
    for (const auto& p : preds) {
      if (!labels.empty()) labels += ' ';
      labels += format_codepoint(p.codepoint) + ' ' + std::to_string(static_cast<long long>(std::lround(p.x))) + ' ' +
                std::to_string(static_cast<long long>(std::lround(p.y)));
    }
    out += csv_field(id) + ',' + labels + '\n';
  }
  return out;
}

Submission parse_submission(std::string_view csv_text) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty() || rows.front().fields != std::vector<std::string>{"image_id", "labels"}) {
    throw ParseError("submission must start with header 'image_id,labels'");
  }
  Submission out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 2) throw ParseError("line " + std::to_string(row.line) + ": expected 2 fields");
    std::vector<std::string> tokens;
    std::istringstream in(row.fields[1]);
    for (std::string t; in >> t;) tokens.push_back(t);
    if (tokens.size() % 3 != 0) {
      throw ParseError("line " + std::to_string(row.line) + ": label token count is not a multiple of 3");
    }
    std::vector<PointPrediction> preds;
    for (std::size_t i = 0; i < tokens.size(); i += 3) {
      PointPrediction p;
      p.codepoint = parse_codepoint(tokens[i]);
      try {
        std::size_t used = 0;
        p.x = std::stod(tokens[i + 1], &used);
        if (used != tokens[i + 1].size()) throw std::invalid_argument("x");
        p.y = std::stod(tokens[i + 2], &used);
        if (used != tokens[i + 2].size()) throw std::invalid_argument("y");
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(row.line) + ": non-numeric coordinate");
      }
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0) {
        throw ParseError("line " + std::to_string(row.line) + ": coordinates must be finite and non-negative");
      }
      preds.push_back(p);
    }
    out.emplace_back(row.fields[0], std::move(preds));
  }
  return out;
}

}  // namespace kforge
