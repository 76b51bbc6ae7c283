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

#include "kforge/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

namespace kforge {

namespace {

struct Field {
  std::string name;  // section.key, or key at top level
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(Rgb c) { return std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b); }

void read(const std::string& s, double& out) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ConfigError("'" + s + "' is not a number");
  out = v;
}
void read(const std::string& s, int& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("'" + s + "' is not an integer");
}
void read(const std::string& s, std::uint64_t& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("'" + s + "' is not an unsigned integer");
  }
}
void read(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
  } else if (s == "false" || s == "0") {
    out = false;
  } else {
    throw ConfigError("'" + s + "' is not a boolean");
  }
}
void read(const std::string& s, Rgb& out) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw ConfigError("'" + s + "' is not an r,g,b colour");
  std::uint8_t v[3];
  for (int i = 0; i < 3; ++i) {
    int c = 0;
    read(trim(std::string(parts[i])), c);
    if (c < 0 || c > 255) throw ConfigError("colour component out of range in '" + s + "'");
    v[i] = static_cast<std::uint8_t>(c);
  }
  out = {v[0], v[1], v[2]};
}

template <typename T, typename Access>
Field field(std::string name, Access access) {
  return {std::move(name), [access](const Config& c) { return show(static_cast<T>(access(const_cast<Config&>(c)))); },
          [access](Config& c, const std::string& v) {
            T tmp{};
            read(v, tmp);
            access(c) = tmp;
          }};
}

#define KF_FIELD(T, name, member) field<T>(name, [](Config& c) -> T& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      KF_FIELD(std::uint64_t, "seed", seed),
      KF_FIELD(double, "logit_scale", logit_scale),
      KF_FIELD(double, "lines.overlap_threshold", lines.overlap_threshold),
      KF_FIELD(int, "augment.k_min", augment.k_min),
      KF_FIELD(int, "augment.k_max", augment.k_max),
      KF_FIELD(int, "augment.erase_margin", augment.erase_margin),
      KF_FIELD(double, "augment.skew_max_deg", augment.skew_max_deg),
      KF_FIELD(double, "augment.elastic_alpha", augment.elastic_alpha),
      KF_FIELD(double, "augment.elastic_sigma", augment.elastic_sigma),
      KF_FIELD(bool, "augment.erase", augment.erase),
      KF_FIELD(bool, "augment.skew", augment.skew),
      KF_FIELD(bool, "augment.elastic", augment.elastic),
      KF_FIELD(int, "crops.group_min", crops.group_min),
      KF_FIELD(int, "crops.group_max", crops.group_max),
      KF_FIELD(int, "crops.margin", crops.margin),
      KF_FIELD(int, "curriculum.patience", stop.patience),
      KF_FIELD(int, "curriculum.max_epochs", stop.max_epochs),
      KF_FIELD(bool, "metrics.literal_crr", crr.literal),
      KF_FIELD(bool, "metrics.include_separator", crr.include_separator),
      KF_FIELD(int, "model.conv1_channels", model.conv1_channels),
      KF_FIELD(int, "model.conv2_channels", model.conv2_channels),
      KF_FIELD(int, "model.feature_channels", model.feature_channels),
      KF_FIELD(bool, "model.position_channels", model.position_channels),
      KF_FIELD(double, "model.position_scale", model.position_scale),
      KF_FIELD(int, "model.embed_dim", model.embed_dim),
      KF_FIELD(int, "model.hidden_dim", model.hidden_dim),
      KF_FIELD(int, "model.attention_dim", model.attention_dim),
      KF_FIELD(int, "model.location_kernel", model.location_kernel),
      KF_FIELD(int, "model.max_width", model.max_width),
      KF_FIELD(int, "model.max_height", model.max_height),
      KF_FIELD(double, "train.rho", train.rho),
      KF_FIELD(double, "train.epsilon", train.epsilon),
      KF_FIELD(double, "train.scale", train.scale),
      KF_FIELD(double, "train.clip_norm", train.clip_norm),
      KF_FIELD(int, "train.batch_size", train.batch_size),
      KF_FIELD(int, "train.max_decode_len", train.max_decode_len),
      KF_FIELD(int, "synth.alphabet_size", synth.alphabet_size),
      KF_FIELD(int, "synth.glyph_size", synth.glyph_size),
      KF_FIELD(int, "synth.lines_min", synth.lines_min),
      KF_FIELD(int, "synth.lines_max", synth.lines_max),
      KF_FIELD(int, "synth.chars_min", synth.chars_min),
      KF_FIELD(int, "synth.chars_max", synth.chars_max),
      KF_FIELD(int, "synth.column_gap_min", synth.column_gap_min),
      KF_FIELD(int, "synth.column_gap_max", synth.column_gap_max),
      KF_FIELD(int, "synth.char_gap_min", synth.char_gap_min),
      KF_FIELD(int, "synth.char_gap_max", synth.char_gap_max),
      KF_FIELD(int, "synth.jitter_x", synth.jitter_x),
      KF_FIELD(int, "synth.jitter_y", synth.jitter_y),
      KF_FIELD(int, "synth.page_width", synth.page_width),
      KF_FIELD(int, "synth.page_height", synth.page_height),
      KF_FIELD(int, "synth.margin", synth.margin),
      KF_FIELD(int, "synth.box_pad", synth.box_pad),
      KF_FIELD(Rgb, "synth.background", synth.background),
      KF_FIELD(Rgb, "synth.ink", synth.ink),
      KF_FIELD(int, "synth.noise_level", synth.noise_level),
      KF_FIELD(std::uint64_t, "synth.alphabet_seed", synth.alphabet_seed),
  };
  return all;
}

#undef KF_FIELD

const Field& find_field(const std::string& name) {
  for (const auto& f : fields()) {
    if (f.name == name) return f;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

void Config::validate() const {
  if (!(lines.overlap_threshold > 0.0 && lines.overlap_threshold <= 1.0)) {
    throw ConfigError("lines.overlap_threshold must be in (0, 1]");
  }
  if (!(logit_scale > 0.0)) throw ConfigError("logit_scale must be > 0");
  augment.validate();
  crops.validate();
  stop.validate();
  model.validate();
  train.validate();
  synth.validate();
}

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string name = section.empty() ? key : section + "." + key;
    try {
      find_field(name).set(c, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) { return parse_config(read_file(path)); }

Config resolve_config(const std::string& path) {
  if (!path.empty()) return load_config(path);
  if (const char* env = std::getenv("KFORGE_CONFIG"); env && *env) return load_config(env);
  return Config{};
}

void set_config_value(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  find_field(trim(assignment.substr(0, eq))).set(config, trim(assignment.substr(eq + 1)));
}

std::string format_config(const Config& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.name.substr(0, dot);
    const std::string key = dot == std::string::npos ? f.name : f.name.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << key << " = " << f.get(config) << '\n';
  }
  return os.str();
}

std::string config_hash(const Config& config) { return hex64(fnv1a64(format_config(config))); }

std::vector<std::string> provenance_metadata(const Config& config) {
  return {"config_hash=" + config_hash(config), "seed=" + std::to_string(config.seed)};
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  const Config defaults;
  for (const auto& f : fields()) out.emplace_back(f.name, f.get(defaults));
  return out;
}

}  // namespace kforge
