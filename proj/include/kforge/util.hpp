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
#include <string>
#include <string_view>
#include <vector>

namespace kforge {

// Collects non-fatal warnings raised while loading or transforming data.
// When echo is set, each warning is also written to stderr.
struct Diagnostics {
  std::vector<std::string> warnings;
  bool echo = true;

  void warn(std::string message);
};

std::string utf8_encode(char32_t cp);
std::string utf8_encode(const std::u32string& text);
/// Throws ParseError on malformed UTF-8.
std::u32string utf8_decode(std::string_view text);

/// "U+304B" -> 0x304B. Throws ParseError on anything else.
char32_t parse_codepoint(std::string_view token);
/// 0x304B -> "U+304B" (at least four hex digits, upper case).
std::string format_codepoint(char32_t cp);

/// Exact round-trippable text form of a double (hex float).
std::string format_hexfloat(double value);
double parse_hexfloat(std::string_view token);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string hex64(std::uint64_t value);

/// Reads a whole file; throws LoadError when missing.
std::string read_file(const std::string& path);
/// Writes atomically enough for our purposes (truncate + write). Throws Error on failure.
void write_file(const std::string& path, std::string_view contents);

/// Escapes backslash, tab and newline as \\, \t and \n for tab-separated records.
std::string escape_field(const std::string& text);
/// Inverse of escape_field. Throws ParseError on an unknown or dangling escape.
std::string unescape_field(const std::string& text);

/// Runs fn(0..n-1) on up to `jobs` threads. Each index runs exactly once;
/// if any call throws, the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace kforge
