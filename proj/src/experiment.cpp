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

#include "kforge/experiment.hpp"

#include <chrono>
#include <cstdio>

#include "kforge/error.hpp"
#include "kforge/lines.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

namespace kforge::desk {

SampleScheduleTrainer::SampleScheduleTrainer(rec::Trainer& trainer, std::map<std::string, const rec::Sample*> samples,
                                             const std::vector<rec::Sample>& valid)
    : trainer_(trainer), samples_(std::move(samples)), valid_(valid) {}

void SampleScheduleTrainer::begin_stage(const cur::CurriculumManifest& manifest) {
  std::vector<const rec::Sample*> set;
  set.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const auto it = samples_.find(e.sample_id);
    if (it == samples_.end()) throw Error("stage " + std::to_string(manifest.stage) + ": unknown sample '" + e.sample_id + "'");
    set.push_back(it->second);
  }
  trainer_.set_training_set(std::move(set));
}

double SampleScheduleTrainer::train_epoch(int stage, int epoch) {
  const auto stats = trainer_.train_epoch(stage, epoch);
  updates_ += stats.updates;
  return stats.mean_loss;
}

double SampleScheduleTrainer::validation_crr() {
  return rec::evaluate_crr(rec::Recognizer(trainer_.params()), valid_, trainer_.hyperparams().max_decode_len);
}

std::any SampleScheduleTrainer::snapshot() const { return trainer_.params(); }

void SampleScheduleTrainer::restore(const std::any& snapshot) {
  trainer_.set_params(std::any_cast<const rec::ModelParams&>(snapshot));
}

LocationStats evaluate_locations(const rec::Recognizer& model, const std::vector<const synth::SynthPage*>& pages,
                                 const CodepointMap& map, int max_len, Submission* submission) {
  std::map<char32_t, char32_t> codepoint_of;  // display symbol -> codepoint
  for (const auto& [cp, text] : map.entries()) {
    const auto u = utf8_decode(text);
    if (u.size() == 1) codepoint_of[u[0]] = cp;
  }
  LocationStats stats;
  std::size_t matched = 0, predicted = 0, truth = 0;
  for (const auto* sp : pages) {
    const auto decoded = model.greedy_decode(sp->image, max_len);
    const auto& symbols = model.params().vocab;
    std::u32string ref;
    std::vector<std::size_t> ref_box;
    for (std::size_t l = 0; l < sp->reading_order.size(); ++l) {
      if (l > 0) {
        ref.push_back(U'\n');
        ref_box.push_back(SIZE_MAX);
      }
      for (const auto i : sp->reading_order[l]) {
        ref += utf8_decode(map.at(sp->page.boxes[i].codepoint));
        ref_box.push_back(i);
      }
    }
    std::u32string hyp;
    std::vector<PointPrediction> preds;
    std::vector<std::size_t> pred_of_token;
    for (std::size_t t = 0; t < decoded.tokens.size(); ++t) {
      const int tok = decoded.tokens[t];
      if (tok == rec::Vocabulary::kSep) {
        hyp.push_back(U'\n');
        pred_of_token.push_back(SIZE_MAX);
        continue;
      }
      const char32_t sym = tok >= rec::Vocabulary::kReserved ? symbols.symbol(tok) : U'\0';
      hyp.push_back(sym);
      const auto [x, y] = rec::locate_from_attention(decoded.attention[t], decoded.grid);
      const auto it = codepoint_of.find(sym);
      pred_of_token.push_back(preds.size());
      preds.push_back({it == codepoint_of.end() ? sym : it->second, x, y});
    }
    for (const auto& [ri, hi] : aligned_matches(ref, hyp)) {
      if (ref_box[ri] == SIZE_MAX) continue;
      ++stats.correct_chars;
      const auto& p = preds[pred_of_token[hi]];
      if (point_in_box(p, sp->page.boxes[ref_box[ri]])) ++stats.located_in_box;
    }
    const auto matching = match_predictions(preds, sp->page.boxes);
    matched += matching.size();
    predicted += preds.size();
    truth += sp->page.boxes.size();
    const auto errs = classify_unmatched(preds, sp->page.boxes, matching);
    stats.errors.wrong_class_right_place += errs.wrong_class_right_place;
    stats.errors.right_class_wrong_place += errs.right_class_wrong_place;
    stats.errors.other += errs.other;
    if (submission) submission->emplace_back(sp->page.image_id, std::move(preds));
  }
  stats.detection = detection_scores_from_counts(matched, predicted, truth);
  return stats;
}

DeskOptions::DeskOptions() {
  hp.scale = 1.0;
  augment.seed = derive_seed(corpus.seed, "augment");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

DeskResult run_desk_experiment(const DeskOptions& options) {
  auto say = [&](const std::string& s) {
    if (options.progress) options.progress(s);
  };
  const std::size_t total = options.train_pages + options.valid_pages + options.heldout_pages;
  const synth::SynthCorpus corpus = synth::gen_corpus(options.corpus, total);
  std::vector<const synth::SynthPage*> train, valid_pages, heldout_pages;
  for (std::size_t i = 0; i < total; ++i) {
    const auto* p = &corpus.pages[i];
    if (i < options.train_pages) {
      train.push_back(p);
    } else if (i < options.train_pages + options.valid_pages) {
      valid_pages.push_back(p);
    } else {
      heldout_pages.push_back(p);
    }
  }
  std::vector<std::string> alphabet;
  for (const auto& [cp, text] : corpus.map.entries()) alphabet.push_back(text);
  const rec::Vocabulary vocab = rec::Vocabulary::from_transcripts(alphabet);

  // Samples: crops, full pages, erasure set.
  std::vector<rec::Sample> crops, full, generated, valid, heldout, train_eval;
  std::vector<cur::ManifestEntry> crop_entries, full_entries, gen_entries;
  for (const auto* p : train) {
    const auto lines = assemble_lines(p->page);
    const auto pieces = cur::make_multiline_crops(p->image, p->page, lines, p->transcript, options.crops,
                                                  derive_seed(options.corpus.seed, "crops/" + p->page.image_id));
    for (const auto& c : pieces) {
      crops.push_back(rec::make_sample(c.id, c.image, c.transcript.flat, vocab));
      crop_entries.push_back({c.id, cur::SampleKind::kMultilineCrop, c.id, c.transcript.flat});
    }
    full.push_back(rec::make_sample(p->page.image_id, p->image, p->transcript.flat, vocab));
    full_entries.push_back({p->page.image_id, cur::SampleKind::kFullPage, p->page.image_id, p->transcript.flat});
  }
  std::vector<aug::SourcePage> sources;
  for (const auto* p : train) sources.push_back({&p->image, &p->page});
  Diagnostics quiet;
  quiet.echo = false;
  const auto records = aug::generate_erasure_set(sources, options.augment, corpus.map, &quiet, options.jobs);
  for (const auto& r : records) {
    generated.push_back(rec::make_sample(r.annotation.image_id, r.image, r.transcript.flat, vocab));
    gen_entries.push_back({r.annotation.image_id, cur::SampleKind::kGenerated, r.annotation.image_id, r.transcript.flat});
  }
  for (const auto* p : valid_pages) valid.push_back(rec::make_sample(p->page.image_id, p->image, p->transcript.flat, vocab));
  for (const auto* p : heldout_pages) {
    heldout.push_back(rec::make_sample(p->page.image_id, p->image, p->transcript.flat, vocab));
  }

  std::map<std::string, const rec::Sample*> lookup;
  for (const auto* set : {&crops, &full, &generated}) {
    for (const auto& s : *set) lookup[s.id] = &s;
  }
  std::vector<cur::CurriculumManifest> manifests;
  for (int stage = 1; stage <= 3; ++stage) {
    manifests.push_back(cur::build_stage_manifest(stage, crop_entries, full_entries, gen_entries));
  }

  DeskResult result;
  for (const auto& m : manifests) result.stage_sizes.push_back(m.entries.size());
  const rec::ModelParams init = rec::ModelParams::init(options.model, vocab, derive_seed(options.hp.seed, "init"));
  const int max_len = options.hp.max_decode_len;

  const auto t0 = std::chrono::steady_clock::now();
  rec::Trainer trainer(init, options.hp);
  SampleScheduleTrainer driver(trainer, lookup, valid);
  say(fmt("curriculum: %.0f crops, %.0f pages, %.0f generated", static_cast<double>(crops.size()),
          static_cast<double>(full.size()), static_cast<double>(generated.size())));
  result.schedule = cur::run_schedule(driver, manifests, options.stop);
  result.curriculum_seconds = seconds_since(t0);
  result.curriculum_updates = driver.updates();
  for (const auto& st : result.schedule.stages) {
    const auto& params = std::any_cast<const rec::ModelParams&>(st.checkpoint);
    const rec::Recognizer model(params);
    result.stage_valid_crr.push_back(st.best_crr);
    result.stage_heldout_crr.push_back(rec::evaluate_crr(model, heldout, max_len));
    say(fmt("stage %.0f: best valid CRR %.2f, held-out CRR %.2f", st.stage, st.best_crr,
            result.stage_heldout_crr.back()));
  }
  result.model = trainer.params();
  const rec::Recognizer final_model(result.model);
  result.heldout_crr = rec::evaluate_crr(final_model, heldout, max_len);
  result.train_crr = rec::evaluate_crr(final_model, full, max_len);
  result.locations = evaluate_locations(final_model, heldout_pages, corpus.map, max_len);
  result.train_locations = evaluate_locations(final_model, train, corpus.map, max_len);
  say(fmt("curriculum: held-out CRR %.2f after %.0f updates, %.0f s", result.heldout_crr,
          static_cast<double>(result.curriculum_updates), result.curriculum_seconds));

  if (options.baseline) {
    const auto t1 = std::chrono::steady_clock::now();
    rec::Trainer base(init, options.hp);
    std::vector<const rec::Sample*> set;
    for (const auto& s : full) set.push_back(&s);
    base.set_training_set(set);
    rec::ModelParams best = init;
    double best_crr = 0.0;
    bool have_best = false;
    long updates = 0;
    int epoch = 0;
    while (updates < result.curriculum_updates) {
      const auto stats = base.train_epoch(0, epoch++);
      updates += stats.updates;
      const double crr = rec::evaluate_crr(rec::Recognizer(base.params()), valid, max_len);
      if (!have_best || crr > best_crr) {
        best_crr = crr;
        best = base.params();
        have_best = true;
      }
    }
    result.baseline_updates = updates;
    result.baseline_epochs = epoch;
    result.baseline_valid_crr = best_crr;
    result.baseline_heldout_crr = rec::evaluate_crr(rec::Recognizer(best), heldout, max_len);
    result.baseline_seconds = seconds_since(t1);
    say(fmt("baseline: held-out CRR %.2f after %.0f updates, %.0f s", result.baseline_heldout_crr,
            static_cast<double>(updates), result.baseline_seconds));
  }
  return result;
}

}  // namespace kforge::desk
