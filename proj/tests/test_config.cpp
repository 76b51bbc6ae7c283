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

#include <cstdlib>
#include <filesystem>

#include "kforge/config.hpp"
#include "kforge/error.hpp"
#include "kforge/util.hpp"

using namespace kforge;

TEST_CASE("defaults round trip through the canonical form") {
  const Config c;
  const auto text = format_config(c);
  CHECK(format_config(parse_config(text)) == text);
  CHECK(config_hash(parse_config(text)) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("sections, comments and overrides") {
  const auto c = parse_config(
      "# top\nseed = 42\n\n[augment]\nk_min = 2\nk_max = 3  \n[train]\nscale=1.0\n[curriculum]\npatience = 4\n");
  CHECK(c.seed == 42);
  CHECK(c.augment.k_min == 2);
  CHECK(c.train.scale == 1.0);
  CHECK(c.stop.patience == 4);
  auto d = c;
  set_config_value(d, "augment.k_max=5");
  set_config_value(d, "seed=7");
  CHECK(d.augment.k_max == 5);
  CHECK(d.seed == 7);
  CHECK(config_hash(d) != config_hash(c));
  const auto meta = provenance_metadata(d);
  CHECK(meta == std::vector<std::string>{"config_hash=" + config_hash(d), "seed=7"});
}

TEST_CASE("every listed key parses back") {
  const auto keys = config_keys();
  CHECK(keys.size() > 30);
  Config c;
  for (const auto& [k, v] : keys) CHECK_NOTHROW(set_config_value(c, k + "=" + v));
  CHECK(format_config(c) == format_config(Config{}));
}

TEST_CASE("unknown keys and bad values name the line") {
  try {
    parse_config("seed = 1\n[augment]\nk_mni = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("k_mni") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[nosuch]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[augment]\nk_min = 4\nk_max = 2\n"), ConfigError);
  Config c;
  CHECK_THROWS_AS(set_config_value(c, "augment.nope=1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "no equals sign"), ConfigError);
}

TEST_CASE("resolve_config falls back to the environment variable") {
  const auto dir = std::filesystem::temp_directory_path() / "kforge_test_config";
  std::filesystem::create_directories(dir);
  const auto env_path = (dir / "env.cfg").string();
  const auto arg_path = (dir / "arg.cfg").string();
  write_file(env_path, "seed = 11\n");
  write_file(arg_path, "seed = 22\n");
  ::unsetenv("KFORGE_CONFIG");
  CHECK(resolve_config("").seed == Config{}.seed);
  ::setenv("KFORGE_CONFIG", env_path.c_str(), 1);
  CHECK(resolve_config("").seed == 11);
  CHECK(resolve_config(arg_path).seed == 22);
  ::unsetenv("KFORGE_CONFIG");
  CHECK_THROWS_AS(load_config((dir / "missing.cfg").string()), LoadError);
  std::filesystem::remove_all(dir);
}
