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

#include <cmath>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"
#include "kforge/trainer.hpp"

using namespace kforge;
using namespace kforge::rec;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.conv1_channels = 4;
  c.conv2_channels = 4;
  c.feature_channels = 8;
  c.embed_dim = 8;
  c.hidden_dim = 16;
  c.attention_dim = 8;
  return c;
}

Raster stripes(int w, int h) {
  Raster img(w, h, {255, 255, 255});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; x += 4) img.set(x, y, {0, 0, 0});
  }
  return img;
}

}  // namespace

TEST_CASE("clip_global_norm") {
  auto g = Weights::zeros(tiny_config(), 6);
  g.out_w.setConstant(3.0);
  const double before = std::sqrt(g.squared_norm());
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(before));
  CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(1.0));
  auto small = Weights::zeros(tiny_config(), 6);
  small.out_w(0, 0) = 0.5;
  clip_global_norm(small, 1.0);
  CHECK(small.out_w(0, 0) == 0.5);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  hp.scale = 0.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp = {};
  hp.clip_norm = -1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

TEST_CASE("a single sample is memorized") {
  const Vocabulary vocab({U'a', U'b'});
  const auto sample = make_sample("s", stripes(16, 16), "ab", vocab);
  Hyperparams hp;
  hp.scale = 1.0;
  hp.batch_size = 1;
  Trainer trainer(ModelParams::init(tiny_config(), vocab, 3), hp);
  trainer.set_training_set({&sample});
  EpochStats stats;
  for (int e = 0; e < 200; ++e) stats = trainer.train_epoch(1, e);
  CHECK(stats.mean_loss < 0.01);
  const Recognizer model(trainer.params());
  CHECK(evaluate_crr(model, {sample}, 8) == 100.0);
}

TEST_CASE("post-clip gradient norm never exceeds the clip norm") {
  const Vocabulary vocab({U'a', U'b', U'c'});
  std::vector<Sample> samples;
  Rng rng(4);
  for (int i = 0; i < 6; ++i) {
    Raster img(24, 24);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        const auto v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        img.set(x, y, {v, v, v});
      }
    }
    samples.push_back(make_sample("s" + std::to_string(i), img, i % 2 ? "abc" : "c\nba", vocab));
  }
  Hyperparams hp;
  hp.clip_norm = 1.0;
  hp.batch_size = 2;
  Trainer trainer(ModelParams::init(tiny_config(), vocab, 5), hp);
  std::vector<const Sample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  trainer.set_training_set(ptrs);
  int updates = 0;
  double max_pre = 0.0;
  trainer.on_update = [&](double pre, double post) {
    ++updates;
    max_pre = std::max(max_pre, pre);
    CHECK(post <= 1.0 + 1e-6);
  };
  for (int e = 0; e < 5; ++e) trainer.train_epoch(1, e);
  CHECK(updates == 15);
  CHECK(max_pre > 1.0);
}

TEST_CASE("training is deterministic") {
  const Vocabulary vocab({U'a', U'b'});
  const auto s1 = make_sample("x", stripes(16, 24), "ab", vocab);
  const auto s2 = make_sample("y", stripes(24, 16), "ba", vocab);
  Hyperparams hp;
  hp.batch_size = 1;
  const auto init = ModelParams::init(tiny_config(), vocab, 8);
  const auto a = train({s1, s2}, {s1}, hp, init, 3);
  const auto b = train({s1, s2}, {s1}, hp, init, 3);
  CHECK(a.params.weights.out_w == b.params.weights.out_w);
  CHECK(a.params.weights.conv_w[0] == b.params.weights.conv_w[0]);
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.log[i].loss == b.log[i].loss);
  const auto log = format_training_log(a.log);
  CHECK(log.rfind("#kforge-trainlog v1\n", 0) == 0);
}

TEST_CASE("non-finite parameters raise a divergence error") {
  const Vocabulary vocab({U'a'});
  const auto sample = make_sample("s", stripes(16, 16), "a", vocab);
  auto params = ModelParams::init(tiny_config(), vocab, 1);
  params.weights.out_w(0, 0) = std::nan("");
  Trainer trainer(params, Hyperparams{});
  trainer.set_training_set({&sample});
  CHECK_THROWS_AS(trainer.train_epoch(1, 0), DivergenceError);
}

TEST_CASE("gradient check: linear output layer, one step") {
  auto p = tiny_gradcheck_problem(11, 1, 0);
  GradCheckOptions o;
  o.tensors = {"out_w", "out_wh", "out_wc"};
  const auto r = grad_check(p.params, p.input, p.width, p.height, p.targets, o);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error <= 1e-7);
}

TEST_CASE("gradient check: full model, three steps") {
  for (const int kernel : {0, 3}) {
    auto p = tiny_gradcheck_problem(12, 3, kernel);
    const auto r = grad_check(p.params, p.input, p.width, p.height, p.targets);
    INFO("worst tensor " << r.worst_tensor);
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.per_tensor.size() >= 17);
  }
}

TEST_CASE("gradient check catches a corrupted W_c gradient") {
  auto p = tiny_gradcheck_problem(13, 3, 0);
  GradCheckOptions o;
  o.corrupt_out_wc = 2.0;
  const auto r = grad_check(p.params, p.input, p.width, p.height, p.targets, o);
  CHECK(r.max_rel_error > 1e-2);
  CHECK(r.worst_tensor == "out_wc");
}
