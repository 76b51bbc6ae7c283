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

#include "kforge/curriculum.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

namespace kforge::cur {

std::string kind_name(SampleKind kind) {
  switch (kind) {
    case SampleKind::kMultilineCrop:
      return "multiline_crop";
    case SampleKind::kFullPage:
      return "full_page";
    case SampleKind::kGenerated:
      return "generated";
  }
  return "?";
}

SampleKind parse_kind(const std::string& name) {
  if (name == "multiline_crop") return SampleKind::kMultilineCrop;
  if (name == "full_page") return SampleKind::kFullPage;
  if (name == "generated") return SampleKind::kGenerated;
  throw ParseError("unknown sample kind '" + name + "'");
}

void CropOptions::validate() const {
  if (group_min < 1 || group_max < group_min) throw ConfigError("crops: need 1 <= group_min <= group_max");
  if (margin < 0) throw ConfigError("crops: margin must be >= 0");
}

std::string crop_id(const std::string& page_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_c%02zu", index);
  return page_id + buf;
}

std::vector<Crop> make_multiline_crops(const Raster& image, const PageAnnotation& page,
                                       const std::vector<TextLine>& lines, const PageTranscript& transcript,
                                       const CropOptions& options, std::uint64_t seed) {
  options.validate();
  std::vector<Crop> out;
  if (lines.empty()) return out;
  if (transcript.lines.size() != lines.size()) {
    throw Error("make_multiline_crops: transcript of '" + page.image_id + "' does not match its lines");
  }
  Rng rng(seed);
  std::size_t next = 0;
  while (next < lines.size()) {
    const auto size = static_cast<std::size_t>(rng.uniform_int(options.group_min, options.group_max));
    const std::size_t end = std::min(lines.size(), next + size);
    Crop crop;
    crop.id = crop_id(page.image_id, out.size());
    Rect r = lines[next].bbox;
    std::vector<std::string> text;
    for (std::size_t i = next; i < end; ++i) {
      r = r.united(lines[i].bbox);
      crop.line_ranks.push_back(static_cast<int>(i));
      text.push_back(transcript.lines[i]);
    }
    crop.region = {std::max(0, r.x0 - options.margin), std::max(0, r.y0 - options.margin),
                   std::min(image.width(), r.x1 + options.margin), std::min(image.height(), r.y1 + options.margin)};
    crop.image = image.crop(crop.region.x0, crop.region.y0, crop.region.width(), crop.region.height());
    crop.transcript = make_transcript(std::move(text));
    out.push_back(std::move(crop));
    next = end;
  }
  return out;
}

CurriculumManifest build_stage_manifest(int stage, const std::vector<ManifestEntry>& crops,
                                        const std::vector<ManifestEntry>& full_pages,
                                        const std::vector<ManifestEntry>& generated) {
  if (stage < 1 || stage > 3) throw Error("stage must be 1, 2 or 3, got " + std::to_string(stage));
  CurriculumManifest m;
  m.stage = stage;
  m.entries = crops;
  if (stage >= 2) m.entries.insert(m.entries.end(), full_pages.begin(), full_pages.end());
  if (stage >= 3) m.entries.insert(m.entries.end(), generated.begin(), generated.end());
  return m;
}

bool multiset_contains(const CurriculumManifest& outer, const CurriculumManifest& inner) {
  std::map<std::string, long> count;
  for (const auto& e : outer.entries) ++count[e.sample_id];
  for (const auto& e : inner.entries) {
    if (--count[e.sample_id] < 0) return false;
  }
  return true;
}

std::string format_manifest(const CurriculumManifest& manifest, const std::vector<std::string>& metadata) {
  std::ostringstream os;
  os << "#kforge-manifest v1\n#stage=" << manifest.stage << '\n';
  for (const auto& m : metadata) os << '#' << m << '\n';
  for (const auto& e : manifest.entries) {
    os << manifest.stage << '\t' << escape_field(e.sample_id) << '\t' << kind_name(e.kind) << '\t'
       << escape_field(e.image_path) << '\t' << escape_field(e.transcript) << '\n';
  }
  return os.str();
}

CurriculumManifest parse_manifest(const std::string& text) {
  const std::string header = "#kforge-manifest ";
  const auto eol = text.find('\n');
  const std::string first = text.substr(0, eol);
  if (first.rfind(header, 0) != 0) throw FormatError("not a manifest file (missing '#kforge-manifest' header)");
  const std::string version = first.substr(header.size());
  if (version != "v1") throw FormatError("manifest version mismatch: expected 'v1', found '" + version + "'");
  if (!text.empty() && text.back() != '\n') throw FormatError("manifest is truncated (no final newline)");
  CurriculumManifest m;
  m.stage = -1;
  std::size_t line_no = 1;
  std::size_t pos = eol == std::string::npos ? text.size() : eol + 1;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.rfind("#stage=", 0) == 0) {
      try {
        m.stage = std::stoi(line.substr(7));
      } catch (const std::exception&) {
        throw FormatError("manifest line " + std::to_string(line_no) + ": bad stage");
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 5 fields, found " +
                        std::to_string(fields.size()));
    }
    int stage = 0;
    try {
      stage = std::stoi(std::string(fields[0]));
    } catch (const std::exception&) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": bad stage '" + std::string(fields[0]) + "'");
    }
    if (m.stage < 0) m.stage = stage;
    if (stage != m.stage) throw FormatError("manifest line " + std::to_string(line_no) + ": mixed stages");
    ManifestEntry e;
    e.sample_id = unescape_field(std::string(fields[1]));
    e.kind = parse_kind(std::string(fields[2]));
    e.image_path = unescape_field(std::string(fields[3]));
    e.transcript = unescape_field(std::string(fields[4]));
    m.entries.push_back(std::move(e));
  }
  if (m.stage < 0) m.stage = 0;
  return m;
}

void save_manifest(const std::string& path, const CurriculumManifest& manifest,
                   const std::vector<std::string>& metadata) {
  write_file(path, format_manifest(manifest, metadata));
}

CurriculumManifest load_manifest(const std::string& path) { return parse_manifest(read_file(path)); }

void StopRule::validate() const {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
}

ScheduleResult run_schedule(ScheduleTrainer& trainer, const std::vector<CurriculumManifest>& manifests,
                            const StopRule& stop) {
  stop.validate();
  ScheduleResult result;
  for (const auto& manifest : manifests) {
    StageResult stage;
    stage.stage = manifest.stage;
    stage.checkpoint = trainer.snapshot();
    trainer.begin_stage(manifest);
    int stale = 0;
    for (int epoch = 0; stop.max_epochs == 0 || epoch < stop.max_epochs; ++epoch) {
      double loss = 0.0;
      try {
        loss = trainer.train_epoch(manifest.stage, epoch);
      } catch (const DivergenceError& e) {
        stage.diverged = true;
        stage.divergence = e.what();
        break;
      }
      const double crr = trainer.validation_crr();
      result.log.push_back({manifest.stage, epoch, loss, crr});
      ++stage.epochs_run;
      if (stage.best_epoch < 0 || crr > stage.best_crr) {
        stage.best_crr = crr;
        stage.best_epoch = epoch;
        stage.checkpoint = trainer.snapshot();
        stale = 0;
      } else if (++stale >= stop.patience) {
        break;
      }
    }
    trainer.restore(stage.checkpoint);
    result.stages.push_back(std::move(stage));
    if (result.stages.back().diverged) {
      result.aborted = true;
      break;
    }
  }
  return result;
}

}  // namespace kforge::cur
