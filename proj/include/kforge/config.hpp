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
#include <string>
#include <vector>

#include "kforge/augment.hpp"
#include "kforge/curriculum.hpp"
#include "kforge/lines.hpp"
#include "kforge/metrics.hpp"
#include "kforge/recognizer.hpp"
#include "kforge/synth.hpp"
#include "kforge/trainer.hpp"

namespace kforge {

/// Every tunable of the pipeline plus the master seed.
///
/// Text form:
///
///     # comment
///     seed = 1
///     [augment]
///     k_min = 1
///
/// Keys before the first section belong to the top level. Unknown sections
/// or keys are rejected.
struct Config {
  std::uint64_t seed = 1;
  LineAssemblyOptions lines;
  aug::AugmentationSpec augment;
  cur::CropOptions crops;
  cur::StopRule stop;
  CrrOptions crr;
  rec::ModelConfig model;
  rec::Hyperparams train;
  synth::CorpusParams synth;
  double logit_scale = 1.0;

  void validate() const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);
/// Loads `path` if non-empty, else $KFORGE_CONFIG if set, else defaults.
Config resolve_config(const std::string& path);

/// Applies one `section.key=value` (or `key=value` for top-level keys) override.
void set_config_value(Config& config, const std::string& assignment);

/// Canonical text form listing every key; parse_config(format_config(c)) == c.
std::string format_config(const Config& config);
/// Hex FNV-1a of the canonical form.
std::string config_hash(const Config& config);
/// Metadata lines embedded in every artifact: config hash and master seed.
std::vector<std::string> provenance_metadata(const Config& config);

/// All `section.key` names with their default values, for help output.
std::vector<std::pair<std::string, std::string>> config_keys();

}  // namespace kforge
