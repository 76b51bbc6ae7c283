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

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "kforge/curriculum.hpp"
#include "kforge/util.hpp"

using namespace kforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

std::string bin() {
  const char* b = std::getenv("KFORGE_BIN");
  return b ? b : KFORGE_BIN;
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "kforge_test_cli";
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args) {
  const auto err_path = (scratch() / "stderr.txt").string();
  const std::string cmd = bin() + " " + args + " 2>" + err_path;
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err_path);
  return r;
}

std::vector<cur::ManifestEntry> entries(const std::string& prefix, std::size_t n, cur::SampleKind kind) {
  std::vector<cur::ManifestEntry> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), kind, prefix + ".png", "t"});
  return out;
}

}  // namespace

TEST_CASE("eval-crr of a file against itself prints CRR 100.00") {
  const auto a = (scratch() / "a.txt").string();
  write_file(a, "あいう\nえお\nkforge\n");
  const auto r = run("eval-crr --ref " + a + " --hyp " + a);
  CHECK(r.status == 0);
  CHECK(r.out == "CRR 100.00\n");
}

TEST_CASE("help lists subcommands and defaults") {
  auto r = run("--help");
  CHECK(r.status == 0);
  for (const char* sub : {"ingest", "lines", "crops", "augment", "stage", "synth", "train", "eval-crr", "eval-f1",
                          "locate", "submit", "gradcheck"}) {
    CHECK(r.out.find(std::string("  ") + sub + " ") != std::string::npos);
  }
  CHECK(r.out.find("--jobs INT:POSITIVE [1]") != std::string::npos);
  r = run("synth --help");
  CHECK(r.out.find("[240]") != std::string::npos);
  r = run("gradcheck --help");
  CHECK(r.out.find("[0.0001]") != std::string::npos);
}

TEST_CASE("errors are a single machine-readable line") {
  for (const std::string args : {"eval-crr --ref /nonexistent/x --hyp /nonexistent/y", "--set nosuch.key=1 gradcheck",
                                 "stage --stage 9 --crops /nonexistent --out /tmp/x"}) {
    const auto r = run(args);
    CHECK(r.status != 0);
    CHECK(r.err.rfind("kforge: error[", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  const auto r = run("nosuchcommand");
  CHECK(r.status != 0);
}

TEST_CASE("gradcheck passes and detects the mutation") {
  const auto r = run("gradcheck");
  CHECK(r.status == 0);
  CHECK(r.out.find("PASS vs 1e-04") != std::string::npos);
  CHECK(r.out.find("DETECTED") != std::string::npos);
}

TEST_CASE("stage 3 on table-sized inputs has 16485 entries") {
  const auto dir = scratch();
  cur::save_manifest((dir / "c.manifest").string(),
                     {0, entries("c", 9499, cur::SampleKind::kMultilineCrop)});
  cur::save_manifest((dir / "f.manifest").string(), {0, entries("f", 3493, cur::SampleKind::kFullPage)});
  cur::save_manifest((dir / "g.manifest").string(), {0, entries("g", 3493, cur::SampleKind::kGenerated)});
  const auto out = (dir / "s3.manifest").string();
  const auto r = run("stage --stage 3 --crops " + (dir / "c.manifest").string() + " --full " +
                     (dir / "f.manifest").string() + " --generated " + (dir / "g.manifest").string() + " --out " +
                     out);
  CHECK(r.status == 0);
  const auto m = cur::load_manifest(out);
  CHECK(m.stage == 3);
  CHECK(m.entries.size() == 16485);
  const auto text = read_file(out);
  CHECK(text.find("#config_hash=") != std::string::npos);
  CHECK(text.find("#seed=") != std::string::npos);
  fs::remove_all(dir);
}
