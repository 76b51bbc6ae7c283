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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kforge/augment.hpp"
#include "kforge/curriculum.hpp"
#include "kforge/metrics.hpp"
#include "kforge/synth.hpp"
#include "kforge/trainer.hpp"

namespace kforge::desk {

/// Drives a rec::Trainer from curriculum manifests whose sample ids resolve
/// to in-memory samples.
class SampleScheduleTrainer : public cur::ScheduleTrainer {
 public:
  SampleScheduleTrainer(rec::Trainer& trainer, std::map<std::string, const rec::Sample*> samples,
                        const std::vector<rec::Sample>& valid);

  void begin_stage(const cur::CurriculumManifest& manifest) override;
  double train_epoch(int stage, int epoch) override;
  double validation_crr() override;
  std::any snapshot() const override;
  void restore(const std::any& snapshot) override;

  /// Optimizer updates performed so far.
  long updates() const { return updates_; }

 private:
  rec::Trainer& trainer_;
  std::map<std::string, const rec::Sample*> samples_;
  const std::vector<rec::Sample>& valid_;
  long updates_ = 0;
};

/// Per-page decode with attention locations, scored against the boxes.
struct LocationStats {
  std::size_t correct_chars = 0;     // decoded characters aligned to an equal reference character
  std::size_t located_in_box = 0;    // ... whose attention point lies in that character's box
  DetectionScores detection;
  LocationErrors errors;

  double located_fraction() const {
    return correct_chars ? static_cast<double>(located_in_box) / static_cast<double>(correct_chars) : 0.0;
  }
};

/// Decodes each page, places every non-separator token at its attention
/// argmax and scores the points against the page boxes.
LocationStats evaluate_locations(const rec::Recognizer& model, const std::vector<const synth::SynthPage*>& pages,
                                 const CodepointMap& map, int max_len, Submission* submission = nullptr);

struct DeskOptions {
  synth::CorpusParams corpus;
  std::size_t train_pages = 200;
  std::size_t valid_pages = 20;
  std::size_t heldout_pages = 40;
  cur::CropOptions crops{1, 2, 4};
  aug::AugmentationSpec augment;
  rec::ModelConfig model;
  rec::Hyperparams hp;
  cur::StopRule stop{10, 40};
  bool baseline = true;
  int jobs = 1;
  std::function<void(const std::string&)> progress;

  DeskOptions();
};

struct DeskResult {
  cur::ScheduleResult schedule;
  std::vector<double> stage_heldout_crr;  // best checkpoint of each stage
  std::vector<double> stage_valid_crr;
  double heldout_crr = 0.0;  // final (stage 3) model
  long curriculum_updates = 0;
  double curriculum_seconds = 0.0;
  double baseline_heldout_crr = 0.0;
  double baseline_valid_crr = 0.0;
  long baseline_updates = 0;
  int baseline_epochs = 0;
  double baseline_seconds = 0.0;
  LocationStats locations;  // final model on held-out pages
  LocationStats train_locations;
  double train_crr = 0.0;  // final model on the training pages
  rec::ModelParams model;
  std::vector<std::size_t> stage_sizes;
};

/// Synthetic corpus → crops / full pages / erasure set → three-stage
/// schedule, then (optionally) a full-page-only baseline trained from the
/// same initialisation for the same number of optimizer updates, keeping its
/// best validation checkpoint.
DeskResult run_desk_experiment(const DeskOptions& options);

}  // namespace kforge::desk
