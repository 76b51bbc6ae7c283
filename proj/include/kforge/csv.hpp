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
#include <string_view>
#include <vector>

namespace kforge {

struct CsvRow {
  int line = 0;  // 1-based line number where the record starts
  std::vector<std::string> fields;
};

/// Comma-separated records with RFC 4180 quoting ("" escapes a quote inside
/// a quoted field). Accepts LF or CRLF line ends; blank lines are skipped.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a field only when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);

}  // namespace kforge
