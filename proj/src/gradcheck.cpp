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

#include <algorithm>
#include <cmath>

#include "kforge/rng.hpp"
#include "kforge/trainer.hpp"

namespace kforge::rec {

GradCheckResult grad_check(const ModelParams& params, const Matrix& input, int width, int height,
                           const std::vector<int>& targets, const GradCheckOptions& options) {
  Weights analytic = Weights::zeros(params.config, params.vocab.size());
  loss_and_gradient(params, input, width, height, targets, &analytic);
  analytic.out_wc *= options.corrupt_out_wc;

  std::vector<std::string> names;
  std::vector<const Matrix*> grads;
  analytic.for_each([&](const char* name, const Matrix& m) {
    names.emplace_back(name);
    grads.push_back(&m);
  });

  GradCheckResult result;
  ModelParams probe = params;
  std::vector<Matrix*> slots;
  probe.weights.for_each([&](const char*, Matrix& m) { slots.push_back(&m); });
  for (std::size_t t = 0; t < slots.size(); ++t) {
    if (!options.tensors.empty() &&
        std::find(options.tensors.begin(), options.tensors.end(), names[t]) == options.tensors.end()) {
      continue;
    }
    Matrix& m = *slots[t];
    double tensor_max = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + options.step;
      const long double up = sequence_loss_extended(probe, input, width, height, targets);
      m.data()[i] = saved - options.step;
      const long double down = sequence_loss_extended(probe, input, width, height, targets);
      m.data()[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * options.step));
      const double a = grads[t]->data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      tensor_max = std::max(tensor_max, rel);
      ++result.checked;
    }
    result.per_tensor.emplace_back(names[t], tensor_max);
    if (result.worst_tensor.empty() || tensor_max > result.max_rel_error) {
      result.max_rel_error = tensor_max;
      result.worst_tensor = names[t];
    }
  }
  return result;
}

GradCheckProblem tiny_gradcheck_problem(std::uint64_t seed, int decode_steps, int location_kernel) {
  ModelConfig cfg;
  cfg.conv1_channels = 2;
  cfg.conv2_channels = 3;
  cfg.feature_channels = 4;
  cfg.position_channels = true;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.attention_dim = 4;
  cfg.location_kernel = location_kernel;
  const Vocabulary vocab({U'a'});
  GradCheckProblem problem{ModelParams::init(cfg, vocab, seed), Matrix(1, 32 * 32), 32, 32, {}};
  Rng rng(derive_seed(seed, "gradcheck"));
  for (Eigen::Index i = 0; i < problem.input.size(); ++i) problem.input(0, i) = rng.uniform01();
  // Scale weights up a little so every path carries a visible gradient.
  problem.params.weights.for_each([&](const char*, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += rng.uniform(-0.3, 0.3);
  });
  const int pattern[] = {Vocabulary::kReserved, Vocabulary::kSep, Vocabulary::kReserved};
  for (int t = 0; t + 1 < decode_steps; ++t) problem.targets.push_back(pattern[t % 3]);
  if (decode_steps > 0) problem.targets.push_back(Vocabulary::kEos);
  return problem;
}

}  // namespace kforge::rec
