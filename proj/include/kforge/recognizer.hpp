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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "kforge/image.hpp"

namespace kforge::rec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Token inventory: four reserved symbols followed by the transcript
/// characters in ascending codepoint order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kReserved = 4;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<char32_t> symbols);
  /// Collects every character (other than the line separator) in the transcripts.
  static Vocabulary from_transcripts(const std::vector<std::string>& transcripts);

  int size() const { return kReserved + static_cast<int>(symbols_.size()); }
  const std::vector<char32_t>& symbols() const { return symbols_; }
  bool contains(char32_t cp) const { return index_.contains(cp); }
  int index_of(char32_t cp) const;
  /// Codepoint of a character token; throws for reserved tokens.
  char32_t symbol(int token) const;

  /// Transcript -> tokens ('\n' becomes <sep>), terminated by <eos>.
  std::vector<int> encode(std::string_view transcript) const;
  /// Tokens -> transcript; stops at <eos>, skips <pad>/<sos>.
  std::string decode(const std::vector<int>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::map<char32_t, int> index_;
};

struct ModelConfig {
  int conv1_channels = 16;
  int conv2_channels = 32;
  int feature_channels = 64;  // D, output of the last convolution block
  bool position_channels = true;
  double position_scale = 0.1;
  int embed_dim = 32;
  int hidden_dim = 64;
  int attention_dim = 32;
  /// Odd kernel width for the previous-attention term of the scorer; 0 disables it.
  int location_kernel = 0;
  int max_width = 512;
  int max_height = 512;

  static constexpr int kStride = 8;
  static constexpr int kBlocks = 3;

  /// Channels per feature cell seen by the attention (D plus position channels).
  int context_dim() const { return feature_channels + (position_channels ? 2 : 0); }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Every learnable tensor. The same layout holds gradients and optimizer state.
struct Weights {
  Matrix conv_w[ModelConfig::kBlocks];  // out × (in·9)
  Matrix conv_b[ModelConfig::kBlocks];  // out × 1
  Matrix embed;                         // M × V, column per token (E)
  Matrix lstm_wx;                       // 4H × (M + Dc)
  Matrix lstm_wh;                       // 4H × H
  Matrix lstm_b;                        // 4H × 1
  Matrix att_u;                         // A × Dc, feature projection
  Matrix att_w;                         // A × H, state projection
  Matrix att_b;                         // A × 1
  Matrix att_v;                         // A × 1
  Matrix att_loc;                       // A × k², empty when location_kernel == 0
  Matrix out_w;                         // V × M (W)
  Matrix out_wh;                        // M × H (W_h)
  Matrix out_wc;                        // M × Dc (W_c)

  static Weights zeros(const ModelConfig& config, int vocab_size);

  template <typename F>
  void for_each(F&& fn) {
    static const char* conv_w_names[] = {"conv1_w", "conv2_w", "conv3_w"};
    static const char* conv_b_names[] = {"conv1_b", "conv2_b", "conv3_b"};
    for (int i = 0; i < ModelConfig::kBlocks; ++i) {
      fn(conv_w_names[i], conv_w[i]);
      fn(conv_b_names[i], conv_b[i]);
    }
    fn("embed", embed);
    fn("lstm_wx", lstm_wx);
    fn("lstm_wh", lstm_wh);
    fn("lstm_b", lstm_b);
    fn("att_u", att_u);
    fn("att_w", att_w);
    fn("att_b", att_b);
    fn("att_v", att_v);
    fn("att_loc", att_loc);
    fn("out_w", out_w);
    fn("out_wh", out_wh);
    fn("out_wc", out_wc);
  }
  template <typename F>
  void for_each(F&& fn) const {
    const_cast<Weights*>(this)->for_each([&](const char* name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }

  void set_zero();
  double squared_norm() const;
  void scale(double factor);
  void add_scaled(const Weights& other, double factor);
  bool all_finite() const;
  std::size_t parameter_count() const;
};

struct ModelParams {
  ModelConfig config;
  Vocabulary vocab;
  Weights weights;

  /// Random initialisation (scaled uniform, forget-gate bias 1).
  static ModelParams init(const ModelConfig& config, const Vocabulary& vocab, std::uint64_t seed);
};

/// Encoder output: rows × cols cells, each a context_dim vector.
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int stride_x = ModelConfig::kStride;
  int stride_y = ModelConfig::kStride;
  int image_width = 0;
  int image_height = 0;
  Matrix values;  // (rows·cols) × context_dim, row-major cell order

  int cells() const { return rows * cols; }
};

struct AttentionMap {
  int rows = 0;
  int cols = 0;
  Vector weights;  // rows·cols, row-major

  double at(int row, int col) const { return weights(row * cols + col); }
};

struct DecoderState {
  Vector hidden;
  Vector memory;
  Vector context;    // previous context c_{t-1}
  Vector attention;  // previous attention weights (location term input)
};

/// Ink intensity in [0, 1] per pixel (1 = black), flattened row-major.
Matrix image_to_input(const Raster& image);

class Recognizer {
 public:
  explicit Recognizer(ModelParams params);

  const ModelParams& params() const { return params_; }
  ModelParams& mutable_params() { return params_; }

  FeatureGrid encode(const Raster& image) const;
  FeatureGrid encode_input(const Matrix& input, int width, int height) const;

  DecoderState initial_state(const FeatureGrid& grid) const;
  /// Additive attention for the given state's hidden vector.
  std::pair<Vector, AttentionMap> attend(const DecoderState& state, const FeatureGrid& grid) const;

  struct Step {
    Vector distribution;
    DecoderState state;
    AttentionMap attention;
  };
  /// One decoder step from the previous token. logit_scale multiplies the
  /// logits before the softmax (temperature hook).
  Step decode_step(int prev_token, const DecoderState& state, const FeatureGrid& grid,
                   double logit_scale = 1.0) const;

  struct Decoded {
    std::vector<int> tokens;  // excludes <eos>
    std::vector<AttentionMap> attention;  // one per token
    bool truncated = false;
    FeatureGrid grid;
    std::string transcript;
  };
  Decoded greedy_decode(const Raster& image, int max_len, double logit_scale = 1.0) const;
  Decoded greedy_decode_input(const Matrix& input, int width, int height, int max_len,
                              double logit_scale = 1.0) const;

 private:
  ModelParams params_;
};

/// Pixel centre of the attention argmax (ties: first in row-major order),
/// clamped to the image extent.
std::pair<double, double> locate_from_attention(const AttentionMap& map, const FeatureGrid& grid);

/// Teacher-forced negative log-likelihood of `targets` (ending in <eos>)
/// and its gradient with respect to every weight.
struct LossAndGrad {
  double loss = 0.0;
  int steps = 0;
};
LossAndGrad loss_and_gradient(const ModelParams& params, const Matrix& input, int width, int height,
                              const std::vector<int>& targets, Weights* grad);

/// Loss only (no gradient).
double sequence_loss(const ModelParams& params, const Matrix& input, int width, int height,
                     const std::vector<int>& targets);
/// The same loss evaluated in long double, for finite-difference checks.
long double sequence_loss_extended(const ModelParams& params, const Matrix& input, int width, int height,
                                   const std::vector<int>& targets);

/// `#kforge-ckpt v1` text checkpoint with hex-float tensors, vocabulary and checksum.
std::string format_params(const ModelParams& params, const std::vector<std::string>& metadata = {});
ModelParams parse_params(std::string_view text);
void save_params(const std::string& path, const ModelParams& params, const std::vector<std::string>& metadata = {});
ModelParams load_params(const std::string& path);
/// As load_params, but checks every tensor shape against `expected`; throws ShapeError naming the tensor.
ModelParams load_params(const std::string& path, const ModelConfig& expected);

}  // namespace kforge::rec
