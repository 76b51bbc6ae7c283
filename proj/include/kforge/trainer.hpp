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
#include <functional>
#include <string>
#include <vector>

#include "kforge/recognizer.hpp"

namespace kforge::rec {

struct Hyperparams {
  double rho = 0.95;
  double epsilon = 1e-6;
  double scale = 0.1;  // AdaDelta update multiplier
  double clip_norm = 5.0;
  int batch_size = 4;
  int max_decode_len = 64;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One training/evaluation example with its image pre-converted to ink intensities.
struct Sample {
  std::string id;
  Matrix input;
  int width = 0;
  int height = 0;
  std::string transcript;
  std::vector<int> targets;  // encoded transcript, ends with <eos>
};

Sample make_sample(std::string id, const Raster& image, std::string transcript, const Vocabulary& vocab);

/// Scales the gradient in place so its global L2 norm is at most max_norm. Returns the norm before clipping.
double clip_global_norm(Weights& grad, double max_norm);

class AdaDelta {
 public:
  AdaDelta(const Weights& like, double rho, double epsilon, double scale);

  void reset();
  void apply(Weights& params, const Weights& grad);

 private:
  double rho_;
  double epsilon_;
  double scale_;
  Weights grad_sq_;
  Weights update_sq_;
};

struct EpochStats {
  double mean_loss = 0.0;
  double max_pre_clip_norm = 0.0;
  double max_post_clip_norm = 0.0;
  int updates = 0;
};

/// Mean validation CRR (percentage form, separator included) of greedy decoding.
double evaluate_crr(const Recognizer& model, const std::vector<Sample>& samples, int max_len);

/// Single-writer training loop: seeded per-epoch shuffle, teacher-forced
/// cross-entropy, global-norm clipping and AdaDelta updates.
class Trainer {
 public:
  Trainer(ModelParams init, Hyperparams hp);

  const ModelParams& params() const { return params_; }
  void set_params(ModelParams params) { params_ = std::move(params); }
  const Hyperparams& hyperparams() const { return hp_; }

  /// Replaces the training set and resets optimizer accumulators.
  void set_training_set(std::vector<const Sample*> samples);
  void reset_optimizer();

  /// One pass over the training set. `tag` separates shuffle streams (e.g. stage number).
  /// Throws DivergenceError on a non-finite loss or gradient.
  EpochStats train_epoch(int tag, int epoch);

  /// Optional observer called after clipping with (pre-clip norm, post-clip norm).
  std::function<void(double, double)> on_update;

 private:
  ModelParams params_;
  Hyperparams hp_;
  AdaDelta optimizer_;
  Weights grad_;
  std::vector<const Sample*> samples_;
};

struct EpochLog {
  int stage = 0;
  int epoch = 0;
  double loss = 0.0;
  double valid_crr = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

/// Plain training for a fixed number of epochs, validating after each epoch.
TrainResult train(const std::vector<Sample>& samples, const std::vector<Sample>& valid, const Hyperparams& hp,
                  const ModelParams& init, int epochs);

std::string format_training_log(const std::vector<EpochLog>& log, const std::vector<std::string>& metadata = {});

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckOptions {
  double step = 1e-5;
  /// Multiplies the analytic W_c gradient before comparing (mutation test of the checker).
  double corrupt_out_wc = 1.0;
  /// Restrict to these tensors; empty checks all.
  std::vector<std::string> tensors;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  std::vector<std::pair<std::string, double>> per_tensor;
};

/// Central differences on every parameter, relative error
/// |a - n| / max(|a|, |n|, 1e-8), maximum over parameters.
GradCheckResult grad_check(const ModelParams& params, const Matrix& input, int width, int height,
                           const std::vector<int>& targets, const GradCheckOptions& options = {});

struct GradCheckProblem {
  ModelParams params;
  Matrix input;
  int width = 0;
  int height = 0;
  std::vector<int> targets;
};

/// Tiny model (vocabulary 5, 4×4 grid, context width 6) with a random
/// 32×32 image and a `decode_steps`-token target ending in <eos>.
GradCheckProblem tiny_gradcheck_problem(std::uint64_t seed, int decode_steps = 3, int location_kernel = 3);

}  // namespace kforge::rec
