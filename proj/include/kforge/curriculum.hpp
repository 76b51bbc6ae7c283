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

#include <any>
#include <cstdint>
#include <string>
#include <vector>

#include "kforge/annotation.hpp"
#include "kforge/image.hpp"
#include "kforge/lines.hpp"

namespace kforge::cur {

enum class SampleKind { kMultilineCrop, kFullPage, kGenerated };

std::string kind_name(SampleKind kind);  // multiline_crop, full_page, generated
SampleKind parse_kind(const std::string& name);

struct ManifestEntry {
  std::string sample_id;
  SampleKind kind = SampleKind::kFullPage;
  std::string image_path;
  std::string transcript;  // flat form, '\n' between lines

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Stage 0 marks a plain entry list (crops, full pages or generated pages)
/// that has not been assembled into a stage yet.
struct CurriculumManifest {
  int stage = 1;
  std::vector<ManifestEntry> entries;

  friend bool operator==(const CurriculumManifest&, const CurriculumManifest&) = default;
};

struct CropOptions {
  int group_min = 1;
  int group_max = 5;
  int margin = 8;

  void validate() const;
};

struct Crop {
  std::string id;
  Raster image;
  Rect region;  // in page coordinates
  std::vector<int> line_ranks;
  PageTranscript transcript;
};

/// Partitions the lines, in reading order, into consecutive groups of size
/// U{group_min..group_max} (the last group takes what is left) and crops the
/// padded union box of each group.
std::vector<Crop> make_multiline_crops(const Raster& image, const PageAnnotation& page,
                                       const std::vector<TextLine>& lines, const PageTranscript& transcript,
                                       const CropOptions& options, std::uint64_t seed);

std::string crop_id(const std::string& page_id, std::size_t index);

/// Stage 1 = crops; 2 = crops + full pages; 3 = crops + full pages + generated.
CurriculumManifest build_stage_manifest(int stage, const std::vector<ManifestEntry>& crops,
                                        const std::vector<ManifestEntry>& full_pages,
                                        const std::vector<ManifestEntry>& generated);

/// True when every sample id of `inner` occurs in `outer` at least as often.
bool multiset_contains(const CurriculumManifest& outer, const CurriculumManifest& inner);

/// `#kforge-manifest v1` and a `#stage=N` line, then
/// `stage<TAB>sample_id<TAB>kind<TAB>image_path<TAB>transcript` records with
/// fields escaped by escape_field.
std::string format_manifest(const CurriculumManifest& manifest, const std::vector<std::string>& metadata = {});
CurriculumManifest parse_manifest(const std::string& text);
void save_manifest(const std::string& path, const CurriculumManifest& manifest,
                   const std::vector<std::string>& metadata = {});
CurriculumManifest load_manifest(const std::string& path);

struct StopRule {
  int patience = 10;
  /// Hard cap on epochs per stage; 0 means no cap.
  int max_epochs = 0;

  void validate() const;
};

/// What run_schedule needs from a trainer. Snapshots are opaque copies of
/// the trainable state.
class ScheduleTrainer {
 public:
  virtual ~ScheduleTrainer() = default;

  /// Installs the stage's samples and resets optimizer accumulators.
  virtual void begin_stage(const CurriculumManifest& manifest) = 0;
  /// Returns the mean training loss; throws DivergenceError on non-finite values.
  virtual double train_epoch(int stage, int epoch) = 0;
  virtual double validation_crr() = 0;
  virtual std::any snapshot() const = 0;
  virtual void restore(const std::any& snapshot) = 0;
};

struct StageEpoch {
  int stage = 0;
  int epoch = 0;
  double loss = 0.0;
  double valid_crr = 0.0;
};

struct StageResult {
  int stage = 0;
  int best_epoch = -1;  // -1 when no epoch finished
  double best_crr = 0.0;
  int epochs_run = 0;
  bool diverged = false;
  std::string divergence;
  std::any checkpoint;
};

struct ScheduleResult {
  std::vector<StageResult> stages;
  std::vector<StageEpoch> log;
  bool aborted = false;
};

/// Trains the stages in order, each warm-started from the previous stage's
/// best parameters. After each epoch the validation CRR is measured; a stage
/// ends once it has not improved for `patience` epochs and its best snapshot
/// (ties go to the earliest epoch) is restored and emitted. A divergence
/// aborts the schedule after restoring the last good snapshot.
ScheduleResult run_schedule(ScheduleTrainer& trainer, const std::vector<CurriculumManifest>& manifests,
                            const StopRule& stop);

}  // namespace kforge::cur
