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

#include <sstream>

#include "kforge/error.hpp"
#include "kforge/recognizer.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

namespace kforge::rec {

namespace {

constexpr std::string_view kHeader = "#kforge-ckpt v1";

std::string format_config(const ModelConfig& c) {
  std::ostringstream out;
  out << "config conv1_channels=" << c.conv1_channels << " conv2_channels=" << c.conv2_channels
      << " feature_channels=" << c.feature_channels << " position_channels=" << (c.position_channels ? 1 : 0)
      << " position_scale=" << format_hexfloat(c.position_scale) << " embed_dim=" << c.embed_dim
      << " hidden_dim=" << c.hidden_dim << " attention_dim=" << c.attention_dim
      << " location_kernel=" << c.location_kernel << " max_width=" << c.max_width << " max_height=" << c.max_height;
  return out.str();
}

ModelConfig parse_config(std::string_view line) {
  const auto parts = split(line, ' ');
  if (parts.empty() || parts[0] != "config") throw FormatError("checkpoint: missing config record");
  ModelConfig c;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string_view::npos) throw FormatError("checkpoint: malformed config item");
    const std::string key(parts[i].substr(0, eq));
    const std::string value(parts[i].substr(eq + 1));
    auto as_int = [&] {
      try {
        return std::stoi(value);
      } catch (...) {
        throw FormatError("checkpoint: bad value for " + key);
      }
    };
    if (key == "conv1_channels") c.conv1_channels = as_int();
    else if (key == "conv2_channels") c.conv2_channels = as_int();
    else if (key == "feature_channels") c.feature_channels = as_int();
    else if (key == "position_channels") c.position_channels = as_int() != 0;
    else if (key == "position_scale") c.position_scale = parse_hexfloat(value);
    else if (key == "embed_dim") c.embed_dim = as_int();
    else if (key == "hidden_dim") c.hidden_dim = as_int();
    else if (key == "attention_dim") c.attention_dim = as_int();
    else if (key == "location_kernel") c.location_kernel = as_int();
    else if (key == "max_width") c.max_width = as_int();
    else if (key == "max_height") c.max_height = as_int();
    else throw FormatError("checkpoint: unknown config key '" + key + "'");
  }
  return c;
}

}  // namespace

std::string format_params(const ModelParams& params, const std::vector<std::string>& metadata) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& m : metadata) out += "#" + m + "\n";
  out += format_config(params.config) + '\n';
  out += "vocab " + std::to_string(params.vocab.symbols().size());
  for (const char32_t cp : params.vocab.symbols()) out += ' ' + format_codepoint(cp);
  out += '\n';
  params.weights.for_each([&](const char* name, const Matrix& m) {
    out += std::string("tensor ") + name + ' ' + std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        out += format_hexfloat(m(r, c));
      }
      out += '\n';
    }
  });
  out += "checksum " + hex64(fnv1a64(out)) + '\n';
  return out;
}

ModelParams parse_params(std::string_view text) {
  const auto header_end = text.find('\n');
  const std::string_view header = text.substr(0, header_end);
  if (header != kHeader) {
    if (header.substr(0, 13) == "#kforge-ckpt ") {
      throw FormatError("checkpoint version mismatch: expected 'v1', found '" + std::string(header.substr(13)) + "'");
    }
    throw FormatError("missing checkpoint header '" + std::string(kHeader) + "'");
  }
  const auto sum_pos = text.rfind("checksum ");
  if (sum_pos == std::string_view::npos || sum_pos == 0 || text[sum_pos - 1] != '\n') {
    throw FormatError("checkpoint: missing checksum");
  }
  std::string_view stored = text.substr(sum_pos + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.remove_suffix(1);
  if (hex64(fnv1a64(text.substr(0, sum_pos))) != stored) throw FormatError("checkpoint: checksum mismatch");

  std::vector<std::string_view> lines;
  for (auto line : split(text.substr(0, sum_pos), '\n')) {
    if (line.empty() || line.front() == '#') continue;
    lines.push_back(line);
  }
  std::size_t li = 0;
  auto next = [&]() -> std::string_view {
    if (li >= lines.size()) throw FormatError("checkpoint: truncated body");
    return lines[li++];
  };

  ModelParams p;
  p.config = parse_config(next());
  p.config.validate();
  const auto vocab_parts = split(next(), ' ');
  if (vocab_parts.size() < 2 || vocab_parts[0] != "vocab") throw FormatError("checkpoint: missing vocab record");
  std::vector<char32_t> symbols;
  for (std::size_t i = 2; i < vocab_parts.size(); ++i) symbols.push_back(parse_codepoint(vocab_parts[i]));
  if (std::to_string(symbols.size()) != vocab_parts[1]) throw FormatError("checkpoint: vocab count mismatch");
  p.vocab = Vocabulary(symbols);
  if (p.vocab.symbols() != symbols) throw FormatError("checkpoint: vocabulary not in canonical order");
  p.weights = Weights::zeros(p.config, p.vocab.size());
  p.weights.for_each([&](const char* name, Matrix& m) {
    const auto head = split(next(), ' ');
    if (head.size() != 4 || head[0] != "tensor" || head[1] != name) {
      throw FormatError(std::string("checkpoint: expected tensor '") + name + "'");
    }
    const auto rows = std::stol(std::string(head[2]));
    const auto cols = std::stol(std::string(head[3]));
    if (rows != m.rows() || cols != m.cols()) {
      throw ShapeError(std::string("checkpoint tensor '") + name + "' is " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", config implies " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto values = split(next(), ' ');
      if (static_cast<Eigen::Index>(values.size()) != m.cols()) {
        throw FormatError(std::string("checkpoint: short row in tensor '") + name + "'");
      }
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = parse_hexfloat(values[static_cast<std::size_t>(c)]);
    }
  });
  if (li != lines.size()) throw FormatError("checkpoint: trailing data");
  return p;
}

void save_params(const std::string& path, const ModelParams& params, const std::vector<std::string>& metadata) {
  write_file(path, format_params(params, metadata));
}

ModelParams load_params(const std::string& path) { return parse_params(read_file(path)); }

ModelParams load_params(const std::string& path, const ModelConfig& expected) {
  ModelParams p = load_params(path);
  const Weights want = Weights::zeros(expected, p.vocab.size());
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> shapes;
  want.for_each([&](const char* name, const Matrix& m) { shapes.push_back({name, {m.rows(), m.cols()}}); });
  std::size_t i = 0;
  p.weights.for_each([&](const char* name, const Matrix& m) {
    const auto& [wname, shape] = shapes[i++];
    if (m.rows() != shape.first || m.cols() != shape.second) {
      throw ShapeError("tensor '" + std::string(name) + "' has shape " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + " but the configured architecture expects " +
                       std::to_string(shape.first) + "x" + std::to_string(shape.second));
    }
  });
  return p;
}

}  // namespace kforge::rec
