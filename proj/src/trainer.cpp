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

#include "kforge/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "kforge/error.hpp"
#include "kforge/metrics.hpp"
#include "kforge/rng.hpp"

namespace kforge::rec {

void Hyperparams::validate() const {
  if (!(scale > 0)) throw ConfigError("AdaDelta scale must be > 0");
  if (!(clip_norm > 0)) throw ConfigError("clip norm must be > 0");
  if (!(rho > 0 && rho < 1)) throw ConfigError("rho must lie in (0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (max_decode_len < 0) throw ConfigError("max decode length must be >= 0");
}

Sample make_sample(std::string id, const Raster& image, std::string transcript, const Vocabulary& vocab) {
  Sample s;
  s.id = std::move(id);
  s.input = image_to_input(image);
  s.width = image.width();
  s.height = image.height();
  s.targets = vocab.encode(transcript);
  s.transcript = std::move(transcript);
  return s;
}

double clip_global_norm(Weights& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (norm > max_norm) grad.scale(max_norm / norm);
  return norm;
}

AdaDelta::AdaDelta(const Weights& like, double rho, double epsilon, double scale)
    : rho_(rho), epsilon_(epsilon), scale_(scale), grad_sq_(like), update_sq_(like) {
  reset();
}

void AdaDelta::reset() {
  grad_sq_.set_zero();
  update_sq_.set_zero();
}

void AdaDelta::apply(Weights& params, const Weights& grad) {
  std::vector<Matrix*> p, eg, ex;
  std::vector<const Matrix*> g;
  params.for_each([&](const char*, Matrix& m) { p.push_back(&m); });
  grad_sq_.for_each([&](const char*, Matrix& m) { eg.push_back(&m); });
  update_sq_.for_each([&](const char*, Matrix& m) { ex.push_back(&m); });
  grad.for_each([&](const char*, const Matrix& m) { g.push_back(&m); });
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i]->size() == 0) continue;
    auto gi = g[i]->array();
    eg[i]->array() = rho_ * eg[i]->array() + (1.0 - rho_) * gi.square();
    const Eigen::ArrayXXd delta = -((ex[i]->array() + epsilon_).sqrt() / (eg[i]->array() + epsilon_).sqrt()) * gi;
    ex[i]->array() = rho_ * ex[i]->array() + (1.0 - rho_) * delta.square();
    p[i]->array() += scale_ * delta;
  }
}

double evaluate_crr(const Recognizer& model, const std::vector<Sample>& samples, int max_len) {
  std::vector<EvalPair> pairs;
  pairs.reserve(samples.size());
  for (const auto& s : samples) {
    pairs.push_back({s.transcript, model.greedy_decode_input(s.input, s.width, s.height, max_len).transcript});
  }
  return crr(pairs);
}

Trainer::Trainer(ModelParams init, Hyperparams hp)
    : params_(std::move(init)),
      hp_(hp),
      optimizer_(params_.weights, hp.rho, hp.epsilon, hp.scale),
      grad_(params_.weights) {
  hp_.validate();
}

void Trainer::set_training_set(std::vector<const Sample*> samples) {
  samples_ = std::move(samples);
  reset_optimizer();
}

void Trainer::reset_optimizer() { optimizer_.reset(); }

EpochStats Trainer::train_epoch(int tag, int epoch) {
  if (samples_.empty()) throw Error("train_epoch: empty training set");
  std::vector<std::size_t> order(samples_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hp_.seed, "epoch/" + std::to_string(tag) + "/" + std::to_string(epoch)));
  rng.shuffle(std::span<std::size_t>(order));

  EpochStats stats;
  double total_loss = 0.0;
  int batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp_.batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp_.batch_size));
    grad_.set_zero();
    double batch_loss = 0.0;
    for (std::size_t k = start; k < end; ++k) {
      const Sample& s = *samples_[order[k]];
      batch_loss += loss_and_gradient(params_, s.input, s.width, s.height, s.targets, &grad_).loss;
    }
    const double n = static_cast<double>(end - start);
    grad_.scale(1.0 / n);
    if (!std::isfinite(batch_loss) || !grad_.all_finite()) {
      double max_abs = 0.0;
      grad_.for_each([&](const char*, const Matrix& m) {
        if (m.size() > 0) max_abs = std::max(max_abs, m.cwiseAbs().maxCoeff());
      });
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + " (max |grad| = " + std::to_string(max_abs) + ")");
    }
    const double pre = clip_global_norm(grad_, hp_.clip_norm);
    const double post = std::sqrt(grad_.squared_norm());
    stats.max_pre_clip_norm = std::max(stats.max_pre_clip_norm, pre);
    stats.max_post_clip_norm = std::max(stats.max_post_clip_norm, post);
    if (on_update) on_update(pre, post);
    optimizer_.apply(params_.weights, grad_);
    total_loss += batch_loss;
    ++stats.updates;
    ++batch_index;
  }
  stats.mean_loss = total_loss / static_cast<double>(samples_.size());
  return stats;
}

TrainResult train(const std::vector<Sample>& samples, const std::vector<Sample>& valid, const Hyperparams& hp,
                  const ModelParams& init, int epochs) {
  Trainer trainer(init, hp);
  std::vector<const Sample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  trainer.set_training_set(ptrs);
  TrainResult result{init, {}};
  for (int e = 1; e <= epochs; ++e) {
    const EpochStats stats = trainer.train_epoch(0, e);
    const double v = valid.empty() ? 0.0 : evaluate_crr(Recognizer(trainer.params()), valid, hp.max_decode_len);
    result.log.push_back({0, e, stats.mean_loss, v});
  }
  result.params = trainer.params();
  return result;
}

std::string format_training_log(const std::vector<EpochLog>& log, const std::vector<std::string>& metadata) {
  std::string out = "#kforge-trainlog v1\n";
  for (const auto& m : metadata) out += "#" + m + "\n";
  for (const auto& e : log) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "stage=%d\tepoch=%d\tloss=%.6f\tvalid_crr=%.4f\n", e.stage, e.epoch, e.loss,
                  e.valid_crr);
    out += buf;
  }
  return out;
}

}  // namespace kforge::rec
