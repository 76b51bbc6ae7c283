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

#include "kforge/recognizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kforge/error.hpp"
#include "kforge/rng.hpp"
#include "kforge/util.hpp"

namespace kforge::rec {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
  std::sort(symbols_.begin(), symbols_.end());
  symbols_.erase(std::unique(symbols_.begin(), symbols_.end()), symbols_.end());
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == U'\n') throw Error("the line separator cannot be a vocabulary symbol");
    index_[symbols_[i]] = kReserved + static_cast<int>(i);
  }
}

Vocabulary Vocabulary::from_transcripts(const std::vector<std::string>& transcripts) {
  std::set<char32_t> seen;
  for (const auto& t : transcripts) {
    for (const char32_t cp : utf8_decode(t)) {
      if (cp != U'\n') seen.insert(cp);
    }
  }
  return Vocabulary(std::vector<char32_t>(seen.begin(), seen.end()));
}

int Vocabulary::index_of(char32_t cp) const {
  const auto it = index_.find(cp);
  if (it == index_.end()) throw Error("symbol " + format_codepoint(cp) + " is not in the vocabulary");
  return it->second;
}

char32_t Vocabulary::symbol(int token) const {
  if (token < kReserved || token >= size()) throw Error("token " + std::to_string(token) + " is not a character");
  return symbols_[static_cast<std::size_t>(token - kReserved)];
}

std::vector<int> Vocabulary::encode(std::string_view transcript) const {
  std::vector<int> out;
  for (const char32_t cp : utf8_decode(transcript)) out.push_back(cp == U'\n' ? kSep : index_of(cp));
  out.push_back(kEos);
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& tokens) const {
  std::string out;
  for (const int t : tokens) {
    if (t == kEos) break;
    if (t == kSep) out.push_back('\n');
    else if (t >= kReserved && t < size()) out += utf8_encode(symbol(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config and weights

void ModelConfig::validate() const {
  if (conv1_channels < 1 || conv2_channels < 1 || feature_channels < 1) throw ConfigError("conv channels must be >= 1");
  if (embed_dim < 1 || hidden_dim < 1 || attention_dim < 1) throw ConfigError("decoder sizes must be >= 1");
  if (location_kernel < 0 || (location_kernel > 0 && location_kernel % 2 == 0)) {
    throw ConfigError("location_kernel must be 0 or odd");
  }
  if (max_width < 1 || max_height < 1) throw ConfigError("max image size must be positive");
}

Weights Weights::zeros(const ModelConfig& c, int vocab_size) {
  Weights w;
  const int channels[] = {1, c.conv1_channels, c.conv2_channels, c.feature_channels};
  for (int i = 0; i < ModelConfig::kBlocks; ++i) {
    w.conv_w[i] = Matrix::Zero(channels[i + 1], channels[i] * 9);
    w.conv_b[i] = Matrix::Zero(channels[i + 1], 1);
  }
  const int dc = c.context_dim();
  const int h = c.hidden_dim;
  w.embed = Matrix::Zero(c.embed_dim, vocab_size);
  w.lstm_wx = Matrix::Zero(4 * h, c.embed_dim + dc);
  w.lstm_wh = Matrix::Zero(4 * h, h);
  w.lstm_b = Matrix::Zero(4 * h, 1);
  w.att_u = Matrix::Zero(c.attention_dim, dc);
  w.att_w = Matrix::Zero(c.attention_dim, h);
  w.att_b = Matrix::Zero(c.attention_dim, 1);
  w.att_v = Matrix::Zero(c.attention_dim, 1);
  w.att_loc = Matrix::Zero(c.location_kernel > 0 ? c.attention_dim : 0, c.location_kernel * c.location_kernel);
  w.out_w = Matrix::Zero(vocab_size, c.embed_dim);
  w.out_wh = Matrix::Zero(c.embed_dim, h);
  w.out_wc = Matrix::Zero(c.embed_dim, dc);
  return w;
}

void Weights::set_zero() {
  for_each([](const char*, Matrix& m) { m.setZero(); });
}

double Weights::squared_norm() const {
  double total = 0.0;
  for_each([&](const char*, const Matrix& m) { total += m.squaredNorm(); });
  return total;
}

void Weights::scale(double factor) {
  for_each([&](const char*, Matrix& m) { m *= factor; });
}

void Weights::add_scaled(const Weights& other, double factor) {
  std::vector<const Matrix*> src;
  other.for_each([&](const char*, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  for_each([&](const char*, Matrix& m) { m += factor * *src[i++]; });
}

bool Weights::all_finite() const {
  bool ok = true;
  for_each([&](const char*, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const char*, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

ModelParams ModelParams::init(const ModelConfig& config, const Vocabulary& vocab, std::uint64_t seed) {
  config.validate();
  ModelParams p{config, vocab, Weights::zeros(config, vocab.size())};
  Rng rng(derive_seed(seed, "init"));
  auto fill = [&](Matrix& m, double bound) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    }
  };
  for (int i = 0; i < ModelConfig::kBlocks; ++i) {
    fill(p.weights.conv_w[i], std::sqrt(6.0 / static_cast<double>(p.weights.conv_w[i].cols())));
  }
  auto glorot = [&](Matrix& m) { fill(m, std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()))); };
  fill(p.weights.embed, 0.1);
  glorot(p.weights.lstm_wx);
  glorot(p.weights.lstm_wh);
  p.weights.lstm_b.block(config.hidden_dim, 0, config.hidden_dim, 1).setOnes();
  glorot(p.weights.att_u);
  glorot(p.weights.att_w);
  glorot(p.weights.att_v);
  if (p.weights.att_loc.size() > 0) glorot(p.weights.att_loc);
  glorot(p.weights.out_w);
  glorot(p.weights.out_wh);
  glorot(p.weights.out_wc);
  return p;
}

// ---------------------------------------------------------------------------
// Forward/backward kernels
//
// The forward pass is templated on the scalar type so finite-difference
// checks can run in extended precision; training uses double throughout.

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

int half_up(int n) { return (n + 1) / 2; }

// First input tap of each stride-2 block. Offsets -1, 0, -1 put the receptive
// field of cell c at 8c + 2.5 px, the closest a 3-tap stack gets to 8c + 4.
constexpr int kFirstTap[ModelConfig::kBlocks] = {-1, 0, -1};

// Extended-precision copy of the weights with the same member names as Weights.
struct WideWeights {
  using M = Mat<long double>;
  M conv_w[ModelConfig::kBlocks], conv_b[ModelConfig::kBlocks];
  M embed, lstm_wx, lstm_wh, lstm_b, att_u, att_w, att_b, att_v, att_loc, out_w, out_wh, out_wc;

  explicit WideWeights(const Weights& w) {
    for (int i = 0; i < ModelConfig::kBlocks; ++i) {
      conv_w[i] = w.conv_w[i].cast<long double>();
      conv_b[i] = w.conv_b[i].cast<long double>();
    }
    embed = w.embed.cast<long double>();
    lstm_wx = w.lstm_wx.cast<long double>();
    lstm_wh = w.lstm_wh.cast<long double>();
    lstm_b = w.lstm_b.cast<long double>();
    att_u = w.att_u.cast<long double>();
    att_w = w.att_w.cast<long double>();
    att_b = w.att_b.cast<long double>();
    att_v = w.att_v.cast<long double>();
    att_loc = w.att_loc.cast<long double>();
    out_w = w.out_w.cast<long double>();
    out_wh = w.out_wh.cast<long double>();
    out_wc = w.out_wc.cast<long double>();
  }
};

// 3×3, stride 2, zero padding 1. in: channels × (h·w) -> (channels·9) × (ho·wo).
template <typename S>
Mat<S> im2col_s2(const Mat<S>& in, int h, int w, int first) {
  const int ho = half_up(h), wo = half_up(w);
  const auto channels = static_cast<int>(in.rows());
  Mat<S> cols = Mat<S>::Zero(channels * 9, ho * wo);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = 2 * oy + ky + first;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = 2 * ox + kx + first;
            if (ix < 0 || ix >= w) continue;
            cols(row, oy * wo + ox) = in(c, iy * w + ix);
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im_s2(const Matrix& cols, int channels, int h, int w, int first) {
  const int ho = half_up(h), wo = half_up(w);
  Matrix out = Matrix::Zero(channels, h * w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = 2 * oy + ky + first;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = 2 * ox + kx + first;
            if (ix < 0 || ix >= w) continue;
            out(c, iy * w + ix) += cols(row, oy * wo + ox);
          }
        }
      }
    }
  }
  return out;
}

// k×k, stride 1, same padding over a single-channel rows×cols map -> cells × k².
template <typename S>
Mat<S> im2col_same(const Vec<S>& map, int rows, int cols, int k) {
  const int r = k / 2;
  Mat<S> out = Mat<S>::Zero(rows * cols, k * k);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - r;
        if (sy < 0 || sy >= rows) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + kx - r;
          if (sx < 0 || sx >= cols) continue;
          out(y * cols + x, ky * k + kx) = map(sy * cols + sx);
        }
      }
    }
  }
  return out;
}

Vector col2im_same(const Matrix& g, int rows, int cols, int k) {
  const int r = k / 2;
  Vector out = Vector::Zero(rows * cols);
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - r;
        if (sy < 0 || sy >= rows) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = x + kx - r;
          if (sx < 0 || sx >= cols) continue;
          out(sy * cols + sx) += g(y * cols + x, ky * k + kx);
        }
      }
    }
  }
  return out;
}

template <typename S>
Vec<S> softmax(const Vec<S>& z) {
  const S top = z.maxCoeff();
  Vec<S> e = (z.array() - top).exp().matrix();
  return e / e.sum();
}

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <typename S>
struct Grid {
  int rows = 0;
  int cols = 0;
  Mat<S> values;  // cells × context_dim

  int cells() const { return rows * cols; }
};

struct EncoderCache {
  int heights[ModelConfig::kBlocks + 1];
  int widths[ModelConfig::kBlocks + 1];
  Matrix cols[ModelConfig::kBlocks];
  Matrix pre[ModelConfig::kBlocks];  // pre-activation, channels × cells
};

void check_input(const ModelConfig& cfg, Eigen::Index input_cols, int width, int height) {
  if (width < 1 || height < 1) throw ShapeError("encode: empty image");
  if (width > cfg.max_width || height > cfg.max_height) {
    throw ShapeError("encode: image " + std::to_string(width) + "x" + std::to_string(height) + " exceeds the " +
                     std::to_string(cfg.max_width) + "x" + std::to_string(cfg.max_height) +
                     " limit; rescale the page first");
  }
  if (input_cols != static_cast<Eigen::Index>(width) * height) {
    throw ShapeError("encode: input tensor does not match image size");
  }
}

template <typename S, typename W>
Grid<S> run_encoder(const ModelConfig& cfg, const W& weights, const Mat<S>& input, int width, int height,
                    EncoderCache* cache) {
  check_input(cfg, input.cols(), width, height);
  Mat<S> act = input;
  int h = height, w = width;
  for (int b = 0; b < ModelConfig::kBlocks; ++b) {
    Mat<S> cols = im2col_s2<S>(act, h, w, kFirstTap[b]);
    Mat<S> pre = weights.conv_w[b] * cols;
    pre.colwise() += weights.conv_b[b].col(0);
    if constexpr (std::is_same_v<S, double>) {
      if (cache) {
        cache->heights[b] = h;
        cache->widths[b] = w;
        cache->cols[b] = std::move(cols);
        cache->pre[b] = pre;
      }
    }
    act = pre.cwiseMax(S(0));
    h = half_up(h);
    w = half_up(w);
  }
  if (cache) {
    cache->heights[ModelConfig::kBlocks] = h;
    cache->widths[ModelConfig::kBlocks] = w;
  }
  Grid<S> grid;
  grid.rows = h;
  grid.cols = w;
  grid.values = Mat<S>::Zero(h * w, cfg.context_dim());
  grid.values.leftCols(cfg.feature_channels) = act.transpose();
  if (cfg.position_channels) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        // Columns are counted from the right edge, where reading starts.
        grid.values(r * w + c, cfg.feature_channels) = static_cast<S>((w - 1 - c) * cfg.position_scale);
        grid.values(r * w + c, cfg.feature_channels + 1) = static_cast<S>(r * cfg.position_scale);
      }
    }
  }
  return grid;
}

void backprop_encoder(const Weights& weights, const EncoderCache& cache, const Matrix& dfeatures, Weights& grad) {
  Matrix dact = dfeatures.transpose();
  for (int b = ModelConfig::kBlocks - 1; b >= 0; --b) {
    Matrix dpre = (cache.pre[b].array() > 0.0).select(dact, 0.0);
    grad.conv_w[b].noalias() += dpre * cache.cols[b].transpose();
    grad.conv_b[b].col(0) += dpre.rowwise().sum();
    if (b == 0) break;
    const Matrix dcols = weights.conv_w[b].transpose() * dpre;
    dact = col2im_s2(dcols, static_cast<int>(weights.conv_w[b].cols() / 9), cache.heights[b], cache.widths[b],
                     kFirstTap[b]);
  }
}

template <typename S>
struct State {
  Vec<S> hidden, memory, context, attention;
};

template <typename S>
struct StepCache {
  int prev_token = 0;
  Vec<S> x;  // [E_prev; c_prev]
  Vec<S> h_prev, m_prev;
  Vec<S> i, f, g, o;
  Vec<S> m, tanh_m, h;
  Mat<S> loc_cols;  // cells × k²
  Mat<S> t;         // tanh of the attention pre-activation, cells × A
  Vec<S> alpha;
  Vec<S> c;
  Vec<S> out;  // E_prev + W_h h + W_c c
  Vec<S> prob;
};

template <typename S, typename W>
class DecoderCore {
 public:
  DecoderCore(const ModelConfig& cfg, const W& weights, const Grid<S>& grid) : cfg_(cfg), w_(weights), grid_(grid) {
    uf_ = grid.values * w_.att_u.transpose();
    uf_.rowwise() += w_.att_b.col(0).transpose();
  }

  State<S> initial() const {
    return {Vec<S>::Zero(cfg_.hidden_dim), Vec<S>::Zero(cfg_.hidden_dim), Vec<S>::Zero(cfg_.context_dim()),
            Vec<S>::Zero(grid_.cells())};
  }

  void attention(const Vec<S>& h, const Vec<S>& prev_alpha, Mat<S>& t, Vec<S>& alpha, Vec<S>& c,
                 Mat<S>* loc_cols) const {
    Mat<S> s = uf_;
    s.rowwise() += (w_.att_w * h).transpose();
    if (cfg_.location_kernel > 0) {
      Mat<S> cols = im2col_same<S>(prev_alpha, grid_.rows, grid_.cols, cfg_.location_kernel);
      s.noalias() += cols * w_.att_loc.transpose();
      if (loc_cols) *loc_cols = std::move(cols);
    }
    t = s.array().tanh().matrix();
    alpha = softmax<S>(t * w_.att_v.col(0));
    c = grid_.values.transpose() * alpha;
  }

  void step(int prev_token, const State<S>& state, StepCache<S>& sc, double logit_scale) const {
    const int hd = cfg_.hidden_dim;
    if (prev_token < 0 || prev_token >= w_.embed.cols()) {
      throw Error("decode_step: token " + std::to_string(prev_token) + " outside the vocabulary");
    }
    sc.prev_token = prev_token;
    sc.x.resize(cfg_.embed_dim + cfg_.context_dim());
    sc.x << w_.embed.col(prev_token), state.context;
    sc.h_prev = state.hidden;
    sc.m_prev = state.memory;
    const Vec<S> z = w_.lstm_wx * sc.x + w_.lstm_wh * sc.h_prev + w_.lstm_b.col(0);
    sc.i = z.segment(0, hd).unaryExpr(&sigmoid<S>);
    sc.f = z.segment(hd, hd).unaryExpr(&sigmoid<S>);
    sc.g = z.segment(2 * hd, hd).array().tanh().matrix();
    sc.o = z.segment(3 * hd, hd).unaryExpr(&sigmoid<S>);
    sc.m = sc.f.cwiseProduct(sc.m_prev) + sc.i.cwiseProduct(sc.g);
    sc.tanh_m = sc.m.array().tanh().matrix();
    sc.h = sc.o.cwiseProduct(sc.tanh_m);
    attention(sc.h, state.attention, sc.t, sc.alpha, sc.c, &sc.loc_cols);
    sc.out = w_.embed.col(prev_token) + w_.out_wh * sc.h + w_.out_wc * sc.c;
    sc.prob = softmax<S>(static_cast<S>(logit_scale) * (w_.out_w * sc.out));
  }

 private:
  const ModelConfig& cfg_;
  const W& w_;
  const Grid<S>& grid_;
  Mat<S> uf_;
};

template <typename S>
State<S> next_state(const StepCache<S>& sc) {
  return {sc.h, sc.m, sc.c, sc.alpha};
}

FeatureGrid to_public(Grid<double> g, int width, int height) {
  FeatureGrid out;
  out.rows = g.rows;
  out.cols = g.cols;
  out.image_width = width;
  out.image_height = height;
  out.values = std::move(g.values);
  return out;
}

Grid<double> to_internal(const FeatureGrid& g) { return {g.rows, g.cols, g.values}; }

DecoderState to_public(State<double> s) {
  return {std::move(s.hidden), std::move(s.memory), std::move(s.context), std::move(s.attention)};
}

State<double> to_internal(const DecoderState& s, int cells) {
  State<double> out{s.hidden, s.memory, s.context, s.attention};
  if (out.attention.size() != cells) out.attention = Vector::Zero(cells);
  return out;
}

AttentionMap make_map(const FeatureGrid& grid, const Vector& alpha) { return {grid.rows, grid.cols, alpha}; }

}  // namespace

Matrix image_to_input(const Raster& image) {
  Matrix out(1, static_cast<Eigen::Index>(image.width()) * image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Rgb c = image.at(x, y);
      const double lum = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
      out(0, y * image.width() + x) = (255.0 - lum) / 255.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recognizer

Recognizer::Recognizer(ModelParams params) : params_(std::move(params)) { params_.config.validate(); }

FeatureGrid Recognizer::encode(const Raster& image) const {
  check_input(params_.config, static_cast<Eigen::Index>(image.width()) * image.height(), image.width(),
              image.height());
  return encode_input(image_to_input(image), image.width(), image.height());
}

FeatureGrid Recognizer::encode_input(const Matrix& input, int width, int height) const {
  return to_public(run_encoder<double>(params_.config, params_.weights, input, width, height, nullptr), width,
                   height);
}

DecoderState Recognizer::initial_state(const FeatureGrid& grid) const {
  const Grid<double> g = to_internal(grid);
  return to_public(DecoderCore<double, Weights>(params_.config, params_.weights, g).initial());
}

std::pair<Vector, AttentionMap> Recognizer::attend(const DecoderState& state, const FeatureGrid& grid) const {
  const Grid<double> g = to_internal(grid);
  DecoderCore<double, Weights> core(params_.config, params_.weights, g);
  const State<double> s = to_internal(state, grid.cells());
  Matrix t;
  Vector alpha, c;
  core.attention(s.hidden, s.attention, t, alpha, c, nullptr);
  return {c, make_map(grid, alpha)};
}

Recognizer::Step Recognizer::decode_step(int prev_token, const DecoderState& state, const FeatureGrid& grid,
                                         double logit_scale) const {
  const Grid<double> g = to_internal(grid);
  DecoderCore<double, Weights> core(params_.config, params_.weights, g);
  StepCache<double> sc;
  core.step(prev_token, to_internal(state, grid.cells()), sc, logit_scale);
  return {sc.prob, to_public(next_state(sc)), make_map(grid, sc.alpha)};
}

Recognizer::Decoded Recognizer::greedy_decode_input(const Matrix& input, int width, int height, int max_len,
                                                    double logit_scale) const {
  Decoded out;
  const Grid<double> g = run_encoder<double>(params_.config, params_.weights, input, width, height, nullptr);
  DecoderCore<double, Weights> core(params_.config, params_.weights, g);
  State<double> state = core.initial();
  int prev = Vocabulary::kSos;
  StepCache<double> sc;
  bool finished = false;
  out.grid.rows = g.rows;
  out.grid.cols = g.cols;
  out.grid.image_width = width;
  out.grid.image_height = height;
  for (int t = 0; t < max_len; ++t) {
    core.step(prev, state, sc, logit_scale);
    Eigen::Index best = 0;
    sc.prob.maxCoeff(&best);
    const int token = static_cast<int>(best);
    if (token == Vocabulary::kEos) {
      finished = true;
      break;
    }
    out.tokens.push_back(token);
    out.attention.push_back(make_map(out.grid, sc.alpha));
    state = next_state(sc);
    prev = token;
  }
  out.grid.values = g.values;
  out.truncated = !finished && max_len > 0;
  out.transcript = params_.vocab.decode(out.tokens);
  return out;
}

Recognizer::Decoded Recognizer::greedy_decode(const Raster& image, int max_len, double logit_scale) const {
  check_input(params_.config, static_cast<Eigen::Index>(image.width()) * image.height(), image.width(),
              image.height());
  return greedy_decode_input(image_to_input(image), image.width(), image.height(), max_len, logit_scale);
}

std::pair<double, double> locate_from_attention(const AttentionMap& map, const FeatureGrid& grid) {
  if (map.rows != grid.rows || map.cols != grid.cols || map.weights.size() != grid.cells()) {
    throw ShapeError("locate_from_attention: map does not match the feature grid");
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < map.weights.size(); ++i) {
    if (map.weights(i) > map.weights(best)) best = i;
  }
  const int row = static_cast<int>(best) / map.cols;
  const int col = static_cast<int>(best) % map.cols;
  double x = (col + 0.5) * grid.stride_x;
  double y = (row + 0.5) * grid.stride_y;
  if (grid.image_width > 0) x = std::min(x, grid.image_width - 0.5);
  if (grid.image_height > 0) y = std::min(y, grid.image_height - 0.5);
  return {x, y};
}

// ---------------------------------------------------------------------------
// Loss and gradient

double sequence_loss(const ModelParams& params, const Matrix& input, int width, int height,
                     const std::vector<int>& targets) {
  return loss_and_gradient(params, input, width, height, targets, nullptr).loss;
}

long double sequence_loss_extended(const ModelParams& params, const Matrix& input, int width, int height,
                                   const std::vector<int>& targets) {
  using S = long double;
  const WideWeights wide(params.weights);
  const Mat<S> wide_input = input.cast<S>();
  const Grid<S> grid = run_encoder<S>(params.config, wide, wide_input, width, height, nullptr);
  DecoderCore<S, WideWeights> core(params.config, wide, grid);
  State<S> state = core.initial();
  StepCache<S> sc;
  S loss = 0;
  int prev = Vocabulary::kSos;
  for (const int target : targets) {
    core.step(prev, state, sc, 1.0);
    loss -= std::log(std::max(sc.prob(target), S(1e-300L)));
    state = next_state(sc);
    prev = target;
  }
  return loss;
}

LossAndGrad loss_and_gradient(const ModelParams& params, const Matrix& input, int width, int height,
                              const std::vector<int>& targets, Weights* grad) {
  const ModelConfig& cfg = params.config;
  const Weights& w = params.weights;
  EncoderCache enc;
  const Grid<double> grid = run_encoder<double>(cfg, w, input, width, height, grad ? &enc : nullptr);
  DecoderCore<double, Weights> core(cfg, w, grid);

  std::vector<StepCache<double>> steps(targets.size());
  State<double> state = core.initial();
  double loss = 0.0;
  int prev = Vocabulary::kSos;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    core.step(prev, state, steps[t], 1.0);
    loss -= std::log(std::max(steps[t].prob(targets[t]), 1e-300));
    state = next_state(steps[t]);
    prev = targets[t];
  }
  LossAndGrad result{loss, static_cast<int>(targets.size())};
  if (!grad) return result;

  const int hd = cfg.hidden_dim;
  const int md = cfg.embed_dim;
  const int cells = grid.cells();
  Matrix dfeat = Matrix::Zero(cells, cfg.context_dim());
  Matrix duf = Matrix::Zero(cells, cfg.attention_dim);
  Vector dh_next = Vector::Zero(hd);
  Vector dm_next = Vector::Zero(hd);
  Vector dc_next = Vector::Zero(cfg.context_dim());
  Vector dalpha_next = Vector::Zero(cells);
  Vector dz(4 * hd);

  for (std::size_t ti = targets.size(); ti-- > 0;) {
    const StepCache<double>& sc = steps[ti];
    // output layer: p = softmax(W (E_prev + W_h h + W_c c))
    Vector dlogits = sc.prob;
    dlogits(targets[ti]) -= 1.0;
    grad->out_w.noalias() += dlogits * sc.out.transpose();
    const Vector dout = w.out_w.transpose() * dlogits;
    grad->embed.col(sc.prev_token) += dout;
    grad->out_wh.noalias() += dout * sc.h.transpose();
    grad->out_wc.noalias() += dout * sc.c.transpose();
    Vector dh = w.out_wh.transpose() * dout + dh_next;
    const Vector dc = w.out_wc.transpose() * dout + dc_next;

    // attention
    const Vector dalpha = grid.values * dc + dalpha_next;
    dfeat.noalias() += sc.alpha * dc.transpose();
    const Vector de = sc.alpha.cwiseProduct((dalpha.array() - sc.alpha.dot(dalpha)).matrix());
    grad->att_v.col(0).noalias() += sc.t.transpose() * de;
    const Matrix ds = ((de * w.att_v.col(0).transpose()).array() * (1.0 - sc.t.array().square())).matrix();
    duf += ds;
    const Vector dwh = ds.colwise().sum().transpose();
    grad->att_w.noalias() += dwh * sc.h.transpose();
    dh.noalias() += w.att_w.transpose() * dwh;
    if (cfg.location_kernel > 0) {
      grad->att_loc.noalias() += ds.transpose() * sc.loc_cols;
      dalpha_next = col2im_same(ds * w.att_loc, grid.rows, grid.cols, cfg.location_kernel);
    }

    // LSTM cell
    const Vector dm = dm_next + dh.cwiseProduct(sc.o).cwiseProduct((1.0 - sc.tanh_m.array().square()).matrix());
    const Vector d_o = dh.cwiseProduct(sc.tanh_m);
    dz.segment(0, hd) = dm.cwiseProduct(sc.g).cwiseProduct(sc.i.cwiseProduct((1.0 - sc.i.array()).matrix()));
    dz.segment(hd, hd) = dm.cwiseProduct(sc.m_prev).cwiseProduct(sc.f.cwiseProduct((1.0 - sc.f.array()).matrix()));
    dz.segment(2 * hd, hd) = dm.cwiseProduct(sc.i).cwiseProduct((1.0 - sc.g.array().square()).matrix());
    dz.segment(3 * hd, hd) = d_o.cwiseProduct(sc.o.cwiseProduct((1.0 - sc.o.array()).matrix()));
    grad->lstm_wx.noalias() += dz * sc.x.transpose();
    grad->lstm_wh.noalias() += dz * sc.h_prev.transpose();
    grad->lstm_b.col(0) += dz;
    const Vector dx = w.lstm_wx.transpose() * dz;
    grad->embed.col(sc.prev_token) += dx.head(md);
    dc_next = dx.tail(cfg.context_dim());
    dh_next = w.lstm_wh.transpose() * dz;
    dm_next = dm.cwiseProduct(sc.f);
  }

  grad->att_u.noalias() += duf.transpose() * grid.values;
  grad->att_b.col(0) += duf.colwise().sum().transpose();
  dfeat.noalias() += duf * w.att_u;
  backprop_encoder(w, enc, dfeat.leftCols(cfg.feature_channels), *grad);
  return result;
}

}  // namespace kforge::rec
