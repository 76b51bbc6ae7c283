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

// kforge: one binary, one subcommand per pipeline step.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "kforge/annotation.hpp"
#include "kforge/augment.hpp"
#include "kforge/config.hpp"
#include "kforge/curriculum.hpp"
#include "kforge/error.hpp"
#include "kforge/experiment.hpp"
#include "kforge/image.hpp"
#include "kforge/lines.hpp"
#include "kforge/metrics.hpp"
#include "kforge/recognizer.hpp"
#include "kforge/rng.hpp"
#include "kforge/synth.hpp"
#include "kforge/trainer.hpp"
#include "kforge/util.hpp"

namespace fs = std::filesystem;
using namespace kforge;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
};

Config effective_config(const Globals& g) {
  Config c = resolve_config(g.config_path);
  for (const auto& o : g.overrides) set_config_value(c, o);
  if (g.seed_given) c.seed = g.seed;
  c.validate();
  return c;
}

void log_line(const std::string& message) { std::cerr << message << '\n'; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

CodepointMap load_map_checked(const std::string& path, const std::vector<PageAnnotation>& pages, Diagnostics* diag) {
  CodepointMap map = load_codepoint_map(path, diag);
  for (const auto& p : pages) {
    for (const auto& b : p.boxes) {
      if (!map.contains(b.codepoint)) {
        throw ParseError("codepoint " + format_codepoint(b.codepoint) + " on page '" + p.image_id +
                         "' is missing from " + path);
      }
    }
  }
  return map;
}

std::vector<PageAnnotation> select_pages(const std::vector<PageAnnotation>& pages, const std::string& split_path,
                                         const std::string& side) {
  if (split_path.empty()) return pages;
  const DatasetSplit split = load_split(split_path);
  const auto& ids = side == "valid" ? split.valid : split.train;
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<PageAnnotation> out;
  for (const auto& p : pages) {
    if (keep.contains(p.image_id)) out.push_back(p);
  }
  return out;
}

rec::Vocabulary vocabulary_of(const std::vector<cur::CurriculumManifest>& manifests) {
  std::vector<std::string> texts;
  for (const auto& m : manifests) {
    for (const auto& e : m.entries) texts.push_back(e.transcript);
  }
  return rec::Vocabulary::from_transcripts(texts);
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const LoadError*>(&e)) return "load";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape";
  if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kforge: line-level transcription datasets, augmentation, curriculum staging and scoring"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Config file (default: $KFORGE_CONFIG, else built-in defaults)");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set augment.k_max=2 (repeatable)");
  app.add_option_function<std::uint64_t>(
      "--seed",
      [&](std::uint64_t s) {
        g.seed = s;
        g.seed_given = true;
      },
      "Master seed (overrides the config's seed)");
  app.add_option("--jobs", g.jobs, "Worker threads for per-page work; output order never depends on it")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::function<void()> action;

  // ingest -----------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Parse an image_id,labels table and write pages + 9:1 split");
  std::string ann_path, image_dir, map_path, out_dir;
  ingest->add_option("--annotations", ann_path, "Annotation table (image_id,labels)")->required();
  ingest->add_option("--images", image_dir, "Directory of page images")->required();
  ingest->add_option("--map", map_path, "Codepoint map (Unicode,char)")->required();
  ingest->add_option("--out", out_dir, "Output directory")->required();
  ingest->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      Diagnostics diag;
      const auto pages = parse_dataset(ann_path, image_dir, &diag);
      load_map_checked(map_path, pages, &diag);
      std::vector<std::string> ids;
      for (const auto& p : pages) ids.push_back(p.image_id);
      fs::create_directories(out_dir);
      const auto meta = provenance_metadata(cfg);
      save_pages((fs::path(out_dir) / "pages.txt").string(), pages, meta);
      std::size_t n_train = 0, n_valid = 0;
      if (!ids.empty()) {
        const auto split = split_train_valid(ids, derive_seed(cfg.seed, "split"));
        write_file((fs::path(out_dir) / "split.txt").string(), format_split(split, meta));
        n_train = split.train.size();
        n_valid = split.valid.size();
      }
      std::cout << "pages " << pages.size() << " train " << n_train << " valid " << n_valid << " warnings "
                << diag.warnings.size() << '\n';
    };
  });

  // lines ------------------------------------------------------------------
  auto* lines_cmd = app.add_subcommand("lines", "Assemble vertical lines; write line dump, transcripts and manifests");
  std::string pages_path, split_path;
  double overlap = -1.0;
  lines_cmd->add_option("--pages", pages_path, "Pages file (#kforge-pages v1)")->required();
  lines_cmd->add_option("--map", map_path, "Codepoint map")->required();
  lines_cmd->add_option("--out", out_dir, "Output directory")->required();
  lines_cmd->add_option("--images", image_dir, "Page image directory (enables full-page manifests)");
  lines_cmd->add_option("--split", split_path, "Split file; with --images writes full_pages/valid manifests");
  lines_cmd->add_option("--overlap", overlap, "Override lines.overlap_threshold");
  lines_cmd->callback([&] {
    action = [&] {
      Config cfg = effective_config(g);
      if (overlap > 0) cfg.lines.overlap_threshold = overlap;
      const auto pages = load_pages(pages_path);
      Diagnostics diag;
      const auto map = load_map_checked(map_path, pages, &diag);
      std::vector<std::vector<TextLine>> all(pages.size());
      std::vector<PageTranscript> transcripts(pages.size());
      parallel_for(pages.size(), g.jobs, [&](std::size_t i) {
        all[i] = assemble_lines(pages[i], cfg.lines);
        transcripts[i] = transcript_of(pages[i], all[i], map);
      });
      fs::create_directories(out_dir);
      const auto meta = provenance_metadata(cfg);
      write_file((fs::path(out_dir) / "lines.txt").string(), format_line_dump(pages, all, meta));
      TranscriptSet set;
      for (std::size_t i = 0; i < pages.size(); ++i) set.emplace_back(pages[i].image_id, transcripts[i].flat);
      write_file((fs::path(out_dir) / "transcripts.txt").string(), format_transcripts(set, meta));
      std::size_t n_lines = 0;
      for (const auto& l : all) n_lines += l.size();
      if (!image_dir.empty()) {
        std::set<std::string> valid_ids;
        if (!split_path.empty()) {
          const auto split = load_split(split_path);
          valid_ids.insert(split.valid.begin(), split.valid.end());
        }
        cur::CurriculumManifest train{0, {}}, valid{0, {}};
        for (std::size_t i = 0; i < pages.size(); ++i) {
          cur::ManifestEntry e{pages[i].image_id, cur::SampleKind::kFullPage,
                               find_page_image(image_dir, pages[i].image_id), transcripts[i].flat};
          (valid_ids.contains(e.sample_id) ? valid : train).entries.push_back(std::move(e));
        }
        cur::save_manifest((fs::path(out_dir) / "full_pages.manifest").string(), train, meta);
        cur::save_manifest((fs::path(out_dir) / "valid.manifest").string(), valid, meta);
      }
      std::cout << "pages " << pages.size() << " lines " << n_lines << '\n';
    };
  });

  // crops ------------------------------------------------------------------
  auto* crops_cmd = app.add_subcommand("crops", "Cut pages into multi-line crops (stage-1 samples)");
  crops_cmd->add_option("--pages", pages_path, "Pages file")->required();
  crops_cmd->add_option("--images", image_dir, "Page image directory")->required();
  crops_cmd->add_option("--map", map_path, "Codepoint map")->required();
  crops_cmd->add_option("--split", split_path, "Split file; only train pages are cropped");
  crops_cmd->add_option("--out", out_dir, "Output directory")->required();
  crops_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const auto pages = select_pages(load_pages(pages_path), split_path, "train");
      Diagnostics diag;
      const auto map = load_map_checked(map_path, pages, &diag);
      fs::create_directories(fs::path(out_dir) / "images");
      std::vector<std::vector<cur::ManifestEntry>> per_page(pages.size());
      parallel_for(pages.size(), g.jobs, [&](std::size_t i) {
        const Raster image = read_image(find_page_image(image_dir, pages[i].image_id));
        const auto lines = assemble_lines(pages[i], cfg.lines);
        const auto transcript = transcript_of(pages[i], lines, map);
        const auto crops = cur::make_multiline_crops(image, pages[i], lines, transcript, cfg.crops,
                                                     derive_seed(cfg.seed, "crops/" + pages[i].image_id));
        for (const auto& c : crops) {
          const std::string path = (fs::path(out_dir) / "images" / (c.id + ".png")).string();
          write_png(path, c.image);
          per_page[i].push_back({c.id, cur::SampleKind::kMultilineCrop, path, c.transcript.flat});
        }
      });
      cur::CurriculumManifest m{1, {}};
      for (auto& v : per_page) m.entries.insert(m.entries.end(), v.begin(), v.end());
      cur::save_manifest((fs::path(out_dir) / "crops.manifest").string(), m, provenance_metadata(cfg));
      std::cout << "pages " << pages.size() << " crops " << m.entries.size() << '\n';
    };
  });

  // augment ----------------------------------------------------------------
  auto* augment = app.add_subcommand("augment", "Random line erasure + skew + elastic distortion, one page per input");
  augment->add_option("--pages", pages_path, "Pages file")->required();
  augment->add_option("--images", image_dir, "Page image directory")->required();
  augment->add_option("--map", map_path, "Codepoint map")->required();
  augment->add_option("--split", split_path, "Split file; only train pages are augmented");
  augment->add_option("--out", out_dir, "Output directory")->required();
  augment->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const auto pages = select_pages(load_pages(pages_path), split_path, "train");
      Diagnostics diag;
      const auto map = load_map_checked(map_path, pages, &diag);
      std::vector<Raster> images(pages.size());
      parallel_for(pages.size(), g.jobs,
                   [&](std::size_t i) { images[i] = read_image(find_page_image(image_dir, pages[i].image_id)); });
      std::vector<aug::SourcePage> sources;
      for (std::size_t i = 0; i < pages.size(); ++i) sources.push_back({&images[i], &pages[i]});
      aug::AugmentationSpec spec = cfg.augment;
      spec.seed = derive_seed(cfg.seed, "augment");
      const auto records = aug::generate_erasure_set(sources, spec, map, &diag, g.jobs, cfg.lines);
      const auto meta = provenance_metadata(cfg);
      aug::write_records(records, out_dir, meta);
      cur::CurriculumManifest m{0, {}};
      for (const auto& r : records) {
        m.entries.push_back({r.annotation.image_id, cur::SampleKind::kGenerated,
                             (fs::path(out_dir) / "images" / (r.annotation.image_id + ".png")).string(),
                             r.transcript.flat});
      }
      cur::save_manifest((fs::path(out_dir) / "generated.manifest").string(), m, meta);
      std::cout << "records " << records.size() << " warnings " << diag.warnings.size() << '\n';
    };
  });

  // stage ------------------------------------------------------------------
  auto* stage_cmd = app.add_subcommand("stage", "Assemble a curriculum stage manifest");
  int stage = 1;
  std::string crops_manifest, full_manifest, gen_manifest, out_path;
  stage_cmd->add_option("--stage", stage, "Stage 1, 2 or 3")->capture_default_str();
  stage_cmd->add_option("--crops", crops_manifest, "Crop entries manifest")->required();
  stage_cmd->add_option("--full", full_manifest, "Full-page entries manifest (stage >= 2)");
  stage_cmd->add_option("--generated", gen_manifest, "Generated-page entries manifest (stage 3)");
  stage_cmd->add_option("--out", out_path, "Output manifest file")->required();
  stage_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      auto load = [](const std::string& p) {
        return p.empty() ? std::vector<cur::ManifestEntry>{} : cur::load_manifest(p).entries;
      };
      if (stage >= 2 && full_manifest.empty()) throw ConfigError("stage " + std::to_string(stage) + " needs --full");
      const auto m = cur::build_stage_manifest(stage, load(crops_manifest), load(full_manifest), load(gen_manifest));
      cur::save_manifest(out_path, m, provenance_metadata(cfg));
      std::cout << "stage " << m.stage << " entries " << m.entries.size() << '\n';
    };
  });

  // synth ------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic vertical-text corpus");
  std::size_t n_pages = 240;
  synth_cmd->add_option("--pages", n_pages, "Number of pages")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();
  synth_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      synth::CorpusParams params = cfg.synth;
      params.seed = cfg.seed;
      const auto corpus = synth::gen_corpus(params, n_pages);
      synth::write_corpus(corpus, out_dir, provenance_metadata(cfg));
      std::cout << "pages " << corpus.pages.size() << " train " << corpus.split.train.size() << " valid "
                << corpus.split.valid.size() << '\n';
    };
  });

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Run the stage schedule with early stopping; write checkpoints");
  std::vector<std::string> stage_manifests;
  std::string valid_manifest, init_path;
  train_cmd->add_option("--stages", stage_manifests, "Stage manifests in order (1 to 3 files)")->required();
  train_cmd->add_option("--valid", valid_manifest, "Validation manifest")->required();
  train_cmd->add_option("--init", init_path, "Warm-start checkpoint");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      std::vector<cur::CurriculumManifest> manifests;
      for (const auto& p : stage_manifests) manifests.push_back(cur::load_manifest(p));
      const auto valid_m = cur::load_manifest(valid_manifest);
      std::vector<cur::CurriculumManifest> all = manifests;
      all.push_back(valid_m);
      rec::ModelParams init;
      if (!init_path.empty()) {
        init = rec::load_params(init_path, cfg.model);
      } else {
        init = rec::ModelParams::init(cfg.model, vocabulary_of(all), derive_seed(cfg.seed, "init"));
      }
      // Decode every distinct image once.
      std::map<std::string, const cur::ManifestEntry*> unique;
      for (const auto& m : manifests) {
        for (const auto& e : m.entries) unique.emplace(e.sample_id, &e);
      }
      std::vector<const cur::ManifestEntry*> todo;
      for (const auto& [id, e] : unique) todo.push_back(e);
      std::vector<rec::Sample> samples(todo.size());
      parallel_for(todo.size(), g.jobs, [&](std::size_t i) {
        samples[i] = rec::make_sample(todo[i]->sample_id, read_image(todo[i]->image_path), todo[i]->transcript,
                                      init.vocab);
      });
      std::vector<rec::Sample> valid(valid_m.entries.size());
      parallel_for(valid.size(), g.jobs, [&](std::size_t i) {
        const auto& e = valid_m.entries[i];
        valid[i] = rec::make_sample(e.sample_id, read_image(e.image_path), e.transcript, init.vocab);
      });
      std::map<std::string, const rec::Sample*> lookup;
      for (const auto& s : samples) lookup[s.id] = &s;
      rec::Hyperparams hp = cfg.train;
      hp.seed = derive_seed(cfg.seed, "train");
      rec::Trainer trainer(init, hp);
      desk::SampleScheduleTrainer driver(trainer, lookup, valid);
      const auto result = cur::run_schedule(driver, manifests, cfg.stop);
      fs::create_directories(out_dir);
      auto meta = provenance_metadata(cfg);
      std::vector<rec::EpochLog> log;
      for (const auto& e : result.log) log.push_back({e.stage, e.epoch, e.loss, e.valid_crr});
      write_file((fs::path(out_dir) / "trainlog.txt").string(), rec::format_training_log(log, meta));
      for (const auto& st : result.stages) {
        auto m = meta;
        m.push_back("stage=" + std::to_string(st.stage));
        m.push_back("best_epoch=" + std::to_string(st.best_epoch));
        m.push_back("valid_crr=" + fixed(st.best_crr, 4));
        rec::save_params((fs::path(out_dir) / ("S" + std::to_string(st.stage) + ".ckpt")).string(),
                         std::any_cast<const rec::ModelParams&>(st.checkpoint), m);
        std::cout << "S" << st.stage << " epochs " << st.epochs_run << " best_epoch " << st.best_epoch
                  << " valid_crr " << fixed(st.best_crr, 2) << '\n';
      }
      if (result.aborted) throw DivergenceError(result.stages.back().divergence);
    };
  });

  // eval-crr ---------------------------------------------------------------
  auto* crr_cmd = app.add_subcommand("eval-crr", "Character recognition rate of hypothesis vs reference transcripts");
  std::string ref_path, hyp_path, report_path;
  crr_cmd->add_option("--ref", ref_path, "Reference transcripts")->required();
  crr_cmd->add_option("--hyp", hyp_path, "Hypothesis transcripts")->required();
  crr_cmd->add_option("--report", report_path, "Write a #kforge-report v1 file");
  crr_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const auto ref = parse_transcripts(read_file(ref_path));
      const auto hyp = parse_transcripts(read_file(hyp_path));
      std::map<std::string, std::string> by_id(hyp.begin(), hyp.end());
      std::vector<ReportRow> rows;
      for (const auto& [id, text] : ref) {
        const auto it = by_id.find(id);
        const auto totals = crr_totals({{text, it == by_id.end() ? "" : it->second}}, cfg.crr);
        rows.push_back({id, totals.edits, totals.reference_chars, 0, 0, 0});
      }
      std::size_t z = 0;
      for (const auto& r : rows) z += r.reference_chars;
      if (z == 0) throw Error("CRR undefined: references contain no characters");
      const auto report = aggregate_report(rows, cfg.crr);
      if (!report_path.empty()) write_file(report_path, format_report_records(report, provenance_metadata(cfg)));
      std::cout << "CRR " << fixed(report.crr, 2) << '\n';
    };
  });

  // eval-f1 ----------------------------------------------------------------
  auto* f1_cmd = app.add_subcommand("eval-f1", "Point-in-box detection precision/recall/F1 of a submission");
  std::string pred_path;
  f1_cmd->add_option("--pages", pages_path, "Ground-truth pages file")->required();
  f1_cmd->add_option("--pred", pred_path, "Submission file (image_id,labels)")->required();
  f1_cmd->add_option("--report", report_path, "Write a #kforge-report v1 file");
  f1_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const auto pages = load_pages(pages_path);
      const auto sub = parse_submission(read_file(pred_path));
      std::map<std::string, const std::vector<PointPrediction>*> by_id;
      for (const auto& [id, preds] : sub) by_id[id] = &preds;
      std::vector<ReportRow> rows;
      LocationErrors errors;
      const std::vector<PointPrediction> none;
      for (const auto& p : pages) {
        const auto it = by_id.find(p.image_id);
        const auto& preds = it == by_id.end() ? none : *it->second;
        const auto matching = match_predictions(preds, p.boxes);
        const auto e = classify_unmatched(preds, p.boxes, matching);
        errors.wrong_class_right_place += e.wrong_class_right_place;
        errors.right_class_wrong_place += e.right_class_wrong_place;
        errors.other += e.other;
        rows.push_back({p.image_id, 0, 0, matching.size(), preds.size(), p.boxes.size()});
      }
      auto report = aggregate_report(rows, cfg.crr);
      report.errors = errors;
      if (!report_path.empty()) write_file(report_path, format_report_records(report, provenance_metadata(cfg)));
      std::cout << "P " << fixed(report.precision, 4) << " R " << fixed(report.recall, 4) << " F1 "
                << fixed(report.f1, 4) << " wrong_class_right_place " << errors.wrong_class_right_place
                << " right_class_wrong_place " << errors.right_class_wrong_place << '\n';
    };
  });

  // locate / submit --------------------------------------------------------
  std::string model_path, image_path, transcripts_out;
  auto decode_page = [&](const rec::Recognizer& model, const Raster& image, const CodepointMap& map,
                         const Config& cfg, std::vector<PointPrediction>& preds) {
    std::map<char32_t, char32_t> codepoint_of;
    for (const auto& [cp, text] : map.entries()) {
      const auto u = utf8_decode(text);
      if (u.size() == 1) codepoint_of[u[0]] = cp;
    }
    const auto d = model.greedy_decode(image, cfg.train.max_decode_len, cfg.logit_scale);
    for (std::size_t t = 0; t < d.tokens.size(); ++t) {
      const int tok = d.tokens[t];
      if (tok < rec::Vocabulary::kReserved) continue;
      const char32_t sym = model.params().vocab.symbol(tok);
      const auto it = codepoint_of.find(sym);
      const auto [x, y] = rec::locate_from_attention(d.attention[t], d.grid);
      preds.push_back({it == codepoint_of.end() ? sym : it->second, x, y});
    }
    return d.transcript;
  };

  auto* locate = app.add_subcommand("locate", "Decode one image and print each character at its attention peak");
  locate->add_option("--model", model_path, "Checkpoint")->required();
  locate->add_option("--image", image_path, "Page image")->required();
  locate->add_option("--map", map_path, "Codepoint map")->required();
  locate->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const rec::Recognizer model(rec::load_params(model_path));
      const auto map = load_codepoint_map(map_path);
      std::vector<PointPrediction> preds;
      decode_page(model, read_image(image_path), map, cfg, preds);
      for (const auto& p : preds) {
        std::cout << format_codepoint(p.codepoint) << ' ' << fixed(p.x, 1) << ' ' << fixed(p.y, 1) << '\n';
      }
    };
  });

  auto* submit = app.add_subcommand("submit", "Decode a directory of pages and write an image_id,labels submission");
  submit->add_option("--model", model_path, "Checkpoint")->required();
  submit->add_option("--images", image_dir, "Image directory")->required();
  submit->add_option("--map", map_path, "Codepoint map")->required();
  submit->add_option("--pages", pages_path, "Restrict to the ids of this pages file");
  submit->add_option("--split", split_path, "With --pages: restrict to the valid side of this split");
  submit->add_option("--transcripts", transcripts_out, "Also write decoded transcripts here");
  submit->add_option("--out", out_path, "Submission file")->required();
  submit->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      const rec::Recognizer model(rec::load_params(model_path));
      const auto map = load_codepoint_map(map_path);
      std::vector<std::string> ids;
      if (!pages_path.empty()) {
        for (const auto& p : select_pages(load_pages(pages_path), split_path, "valid")) ids.push_back(p.image_id);
      } else {
        ids = list_images(image_dir);
      }
      Submission sub(ids.size());
      TranscriptSet texts(ids.size());
      parallel_for(ids.size(), g.jobs, [&](std::size_t i) {
        sub[i].first = ids[i];
        texts[i].first = ids[i];
        texts[i].second = decode_page(model, read_image(find_page_image(image_dir, ids[i])), map, cfg, sub[i].second);
      });
      write_file(out_path, format_submission(sub));
      if (!transcripts_out.empty()) write_file(transcripts_out, format_transcripts(texts, provenance_metadata(cfg)));
      std::cout << "pages " << ids.size() << '\n';
    };
  });

  // gradcheck --------------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the recognizer gradients on a tiny model");
  std::uint64_t gc_seed = 1;
  int gc_steps = 3, gc_kernel = 3;
  double tolerance = 1e-4;
  gc->add_option("--problem-seed", gc_seed, "Seed of the random tiny problem")->capture_default_str();
  gc->add_option("--steps", gc_steps, "Decode steps (targets incl. <eos>)")->capture_default_str();
  gc->add_option("--location-kernel", gc_kernel, "Location-term kernel of the tiny model (0 = off)")
      ->capture_default_str();
  gc->add_option("--tolerance", tolerance, "Pass threshold on the max relative error")->capture_default_str();
  gc->callback([&] {
    action = [&] {
      effective_config(g);
      const auto problem = rec::tiny_gradcheck_problem(gc_seed, gc_steps, gc_kernel);
      const auto r = rec::grad_check(problem.params, problem.input, problem.width, problem.height, problem.targets);
      rec::GradCheckOptions mutated;
      mutated.corrupt_out_wc = 2.0;
      const auto m = rec::grad_check(problem.params, problem.input, problem.width, problem.height, problem.targets,
                                     mutated);
      char buf[256];
      std::snprintf(buf, sizeof buf, "max relative error %.3e (%s, %zu parameters) %s vs %.0e", r.max_rel_error,
                    r.worst_tensor.c_str(), r.checked, r.max_rel_error <= tolerance ? "PASS" : "FAIL", tolerance);
      std::cout << buf << '\n';
      std::snprintf(buf, sizeof buf, "mutation (W_c gradient x2) max relative error %.3e %s", m.max_rel_error,
                    m.max_rel_error > 1e-2 ? "DETECTED" : "MISSED");
      std::cout << buf << '\n';
      if (r.max_rel_error > tolerance || m.max_rel_error <= 1e-2) throw Error("gradient check failed");
    };
  });

  // desk -------------------------------------------------------------------
  auto* desk_cmd = app.add_subcommand("desk", "Desk-scale experiment: curriculum vs full-page-only baseline");
  bool no_baseline = false;
  desk_cmd->add_flag("--no-baseline", no_baseline, "Skip the full-page-only baseline");
  desk_cmd->add_option("--out", out_dir, "Directory for the final checkpoint and report")->required();
  desk_cmd->callback([&] {
    action = [&] {
      const Config cfg = effective_config(g);
      desk::DeskOptions o;
      o.corpus = cfg.synth;
      o.corpus.seed = cfg.seed;
      o.augment = cfg.augment;
      o.augment.seed = derive_seed(cfg.seed, "augment");
      o.model = cfg.model;
      o.baseline = !no_baseline;
      o.jobs = g.jobs;
      o.progress = log_line;
      const auto r = desk::run_desk_experiment(o);
      fs::create_directories(out_dir);
      const auto meta = provenance_metadata(cfg);
      rec::save_params((fs::path(out_dir) / "S3.ckpt").string(), r.model, meta);
      std::ostringstream os;
      os << "#kforge-report v1\n";
      for (const auto& m : meta) os << '#' << m << '\n';
      for (std::size_t i = 0; i < r.stage_heldout_crr.size(); ++i) {
        os << "stage\t" << i + 1 << "\tvalid_crr=" << fixed(r.stage_valid_crr[i], 4)
           << "\theldout_crr=" << fixed(r.stage_heldout_crr[i], 4) << '\n';
      }
      os << "curriculum\theldout_crr=" << fixed(r.heldout_crr, 4) << "\tupdates=" << r.curriculum_updates << '\n';
      if (o.baseline) {
        os << "baseline\theldout_crr=" << fixed(r.baseline_heldout_crr, 4) << "\tupdates=" << r.baseline_updates
           << '\n';
      }
      os << "locate\tin_box=" << fixed(r.locations.located_fraction(), 4)
         << "\tf1=" << fixed(r.locations.detection.f1, 4)
         << "\twrong_class_right_place=" << r.locations.errors.wrong_class_right_place
         << "\tright_class_wrong_place=" << r.locations.errors.right_class_wrong_place << '\n';
      write_file((fs::path(out_dir) / "report.txt").string(), os.str());
      std::cout << os.str();
    };
  });

  // Every option lists its default in --help.
  for (auto* sub : app.get_subcommands({})) {
    for (auto* opt : sub->get_options()) {
      if (opt->get_expected_min() > 0 && opt->get_default_str().empty()) opt->capture_default_str();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (action) action();
  } catch (const std::exception& e) {
    std::cerr << "kforge: error[" << error_kind(e) << "]: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
