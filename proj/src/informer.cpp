#include "optlab/informer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace optlab {

namespace {

constexpr double kMaskValue = -1e30;

Tensor causal_mask(int l_q, int l_k) {
  std::vector<double> data(std::size_t(l_q) * l_k, 0.0);
  for (int i = 0; i < l_q; ++i)
    for (int j = i + 1; j < l_k; ++j) data[std::size_t(i) * l_k + j] = kMaskValue;
  return Tensor::from(l_q, l_k, std::move(data));
}

Tensor init_matrix(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(rows));
  std::vector<double> data(std::size_t(rows) * cols);
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true);
}

Tensor zeros_param(int rows, int cols) {
  return Tensor::zeros(rows, cols, /*requires_grad=*/true);
}

Tensor ones_param(int cols) {
  return Tensor::from(1, cols, std::vector<double>(std::size_t(cols), 1.0),
                      /*requires_grad=*/true);
}

AttentionParams init_attention(const ModelConfig& cfg, Rng& rng) {
  AttentionParams p;
  const int hd = cfg.head_dim();
  for (int h = 0; h < cfg.n_heads; ++h) {
    p.w_q.push_back(init_matrix(cfg.d_model, hd, rng));
    p.w_k.push_back(init_matrix(cfg.d_model, hd, rng));
    p.w_v.push_back(init_matrix(cfg.d_model, hd, rng));
  }
  p.w_o = init_matrix(cfg.n_heads * hd, cfg.d_model, rng);
  p.b_o = zeros_param(1, cfg.d_model);
  p.ln_gain = ones_param(cfg.d_model);
  p.ln_bias = zeros_param(1, cfg.d_model);
  return p;
}

FeedForwardParams init_feed_forward(const ModelConfig& cfg, Rng& rng) {
  FeedForwardParams p;
  p.w1 = init_matrix(cfg.d_model, cfg.d_ff, rng);
  p.b1 = zeros_param(1, cfg.d_ff);
  p.w2 = init_matrix(cfg.d_ff, cfg.d_model, rng);
  p.b2 = zeros_param(1, cfg.d_model);
  p.ln_gain = ones_param(cfg.d_model);
  p.ln_bias = zeros_param(1, cfg.d_model);
  return p;
}

void visit_attention(const std::string& prefix, AttentionParams& p,
                     const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t h = 0; h < p.w_q.size(); ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    fn(hp + ".w_q", p.w_q[h]);
    fn(hp + ".w_k", p.w_k[h]);
    fn(hp + ".w_v", p.w_v[h]);
  }
  fn(prefix + ".w_o", p.w_o);
  fn(prefix + ".b_o", p.b_o);
  fn(prefix + ".ln_gain", p.ln_gain);
  fn(prefix + ".ln_bias", p.ln_bias);
}

void visit_feed_forward(const std::string& prefix, FeedForwardParams& p,
                        const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".w1", p.w1);
  fn(prefix + ".b1", p.b1);
  fn(prefix + ".w2", p.w2);
  fn(prefix + ".b2", p.b2);
  fn(prefix + ".ln_gain", p.ln_gain);
  fn(prefix + ".ln_bias", p.ln_bias);
}

}  // namespace

int ModelConfig::encoder_output_length() const {
  int length = t_x;
  if (distilling) {
    for (int layer = 0; layer < n_encoder_layers; ++layer)
      length = (length + 1) / 2;
  }
  return length;
}

void ModelConfig::validate() const {
  if (t_x < 1 || t_y < 1 || t_label < 0 || t_label > t_x) {
    throw std::invalid_argument("ModelConfig: bad sequence lengths");
  }
  if (n_features < 1 || d_model < 1 || d_ff < 1 || n_heads < 1 ||
      n_encoder_layers < 1 || n_decoder_layers < 1) {
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  }
  if (head_dim() < 1) {
    throw std::invalid_argument("ModelConfig: more heads than model dimensions");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  }
  if (sparsity_factor < 1) {
    throw std::invalid_argument("ModelConfig: sparsity factor must be >= 1");
  }
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            bool causal, std::vector<Tensor>* attention_weights) {
  if (k.rows() != v.rows()) {
    throw std::invalid_argument("scaled_dot_attention: key/value length mismatch");
  }
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(q.cols())));
  if (causal) scores = add(scores, causal_mask(q.rows(), k.rows()));
  Tensor weights = softmax_rows(scores);
  if (attention_weights) attention_weights->push_back(weights);
  return matmul(weights, v);
}

// Log base 2: with base e, factor 3 would leave L = 7 under-covered
// (3 * ceil(ln 7) = 6), breaking the guaranteed full-attention equivalence
// for short sequences.
int probsparse_top_u(int l_q, int factor) {
  const int u = factor * int(std::ceil(std::log2(double(l_q))));
  return std::min(l_q, u);
}

int probsparse_sample_count(int l_k, int factor) {
  const int s = factor * int(std::ceil(std::log2(double(l_k))));
  return std::min(l_k, std::max(1, s));
}

std::vector<double> sparsity_scores(const Tensor& q, const Tensor& k,
                                    const std::vector<int>& sampled_keys) {
  if (sampled_keys.empty()) {
    throw std::invalid_argument("sparsity_scores: need at least one sampled key");
  }
  const int d = q.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
  std::vector<double> scores(std::size_t(q.rows()));
  for (int i = 0; i < q.rows(); ++i) {
    double max_s = -std::numeric_limits<double>::infinity();
    double sum_s = 0.0;
    for (int j : sampled_keys) {
      if (j < 0 || j >= k.rows()) {
        throw std::invalid_argument("sparsity_scores: sampled key out of range");
      }
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += q.at(i, c) * k.at(j, c);
      const double s = dot * inv_sqrt_d;
      max_s = std::max(max_s, s);
      sum_s += s;
    }
    scores[std::size_t(i)] = max_s - sum_s / double(sampled_keys.size());
  }
  return scores;
}

Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int factor, Rng& rng,
                            std::vector<Tensor>* attention_weights) {
  if (factor < 1) {
    throw std::invalid_argument("probsparse_attention: factor must be >= 1");
  }
  if (k.rows() != v.rows()) {
    throw std::invalid_argument("probsparse_attention: key/value length mismatch");
  }
  const int l_q = q.rows();
  const int top_u = probsparse_top_u(l_q, factor);
  if (top_u >= l_q) {
    return scaled_dot_attention(q, k, v, /*causal=*/false, attention_weights);
  }
  if (top_u == 0) {
    // every query is lazy; with L_q = 1 this still equals full attention
    // because the mean over one value row is that row
    return matmul(Tensor::full(l_q, 1, 1.0), mean(v, /*axis=*/0));
  }

  // uniform key sample (without replacement) for the measurement
  const int n_sample = probsparse_sample_count(k.rows(), factor);
  std::vector<int> pool(std::size_t(k.rows()));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n_sample; ++i) {
    const int j = i + int(rng.index(std::size_t(k.rows() - i)));
    std::swap(pool[std::size_t(i)], pool[std::size_t(j)]);
  }
  pool.resize(std::size_t(n_sample));
  const std::vector<double> measurement = sparsity_scores(q, k, pool);

  std::vector<int> order(std::size_t(l_q), 0);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return measurement[std::size_t(a)] > measurement[std::size_t(b)];
  });
  std::vector<int> active(order.begin(), order.begin() + top_u);
  std::sort(active.begin(), active.end());

  Tensor out_active = scaled_dot_attention(gather_rows(q, active), k, v,
                                           /*causal=*/false, attention_weights);
  // lazy queries fall back to the column mean of V (uniform attention)
  Tensor lazy = matmul(Tensor::full(l_q, 1, 1.0), mean(v, /*axis=*/0));
  return scatter_rows(lazy, out_active, std::move(active));
}

Tensor positional_encoding(int length, int d_model) {
  std::vector<double> data(std::size_t(length) * d_model);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      const double exponent = double(i - (i % 2)) / double(d_model);
      const double angle = pos / std::pow(10000.0, exponent);
      data[std::size_t(pos) * d_model + i] =
          (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from(length, d_model, std::move(data));
}

Tensor multi_head_attention(const Tensor& x, const Tensor& memory,
                            const AttentionParams& params, int n_heads,
                            AttentionKind kind, int factor, bool causal,
                            double dropout_rate, const ForwardOptions& opts,
                            Rng& fallback_rng) {
  Rng& rng = opts.rng ? *opts.rng : fallback_rng;
  Tensor heads;
  for (int h = 0; h < n_heads; ++h) {
    const Tensor q = matmul(x, params.w_q[std::size_t(h)]);
    const Tensor k = matmul(memory, params.w_k[std::size_t(h)]);
    const Tensor v = matmul(memory, params.w_v[std::size_t(h)]);
    // ProbSparse selection assumes unrestricted key access, so masked
    // (decoder self-attention) sublayers always run the full variant.
    Tensor head =
        (kind == AttentionKind::kProbSparse && !causal)
            ? probsparse_attention(q, k, v, factor, rng, opts.attention_weights)
            : scaled_dot_attention(q, k, v, causal, opts.attention_weights);
    heads = h == 0 ? head : concat(heads, head, /*axis=*/1);
  }
  Tensor projected = add(matmul(heads, params.w_o), params.b_o);
  projected = dropout(projected, dropout_rate, rng, opts.training);
  return layer_norm_rows(add(x, projected), params.ln_gain, params.ln_bias);
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& params,
                    double dropout_rate, const ForwardOptions& opts,
                    Rng& fallback_rng) {
  Rng& rng = opts.rng ? *opts.rng : fallback_rng;
  Tensor hidden = relu(add(matmul(x, params.w1), params.b1));
  Tensor out = add(matmul(hidden, params.w2), params.b2);
  out = dropout(out, dropout_rate, rng, opts.training);
  return layer_norm_rows(add(x, out), params.ln_gain, params.ln_bias);
}

InformerModel::InformerModel(const ModelConfig& config, Rng init_rng)
    : config_(config) {
  config_.validate();
  encoder_embedding_.w = init_matrix(config_.n_features, config_.d_model, init_rng);
  encoder_embedding_.b = zeros_param(1, config_.d_model);
  decoder_embedding_.w = init_matrix(1, config_.d_model, init_rng);
  decoder_embedding_.b = zeros_param(1, config_.d_model);
  for (int l = 0; l < config_.n_encoder_layers; ++l) {
    EncoderLayerParams layer;
    layer.self_attention = init_attention(config_, init_rng);
    layer.feed_forward = init_feed_forward(config_, init_rng);
    encoder_layers_.push_back(std::move(layer));
  }
  for (int l = 0; l < config_.n_decoder_layers; ++l) {
    DecoderLayerParams layer;
    layer.self_attention = init_attention(config_, init_rng);
    layer.cross_attention = init_attention(config_, init_rng);
    layer.feed_forward = init_feed_forward(config_, init_rng);
    decoder_layers_.push_back(std::move(layer));
  }
  head_w_ = init_matrix(config_.d_model, 1, init_rng);
  head_b_ = zeros_param(1, 1);
  encoder_pe_ = positional_encoding(config_.t_x, config_.d_model);
  decoder_pe_ = positional_encoding(config_.decoder_length(), config_.d_model);
}

void InformerModel::for_each_parameter(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("encoder.embed.w", encoder_embedding_.w);
  fn("encoder.embed.b", encoder_embedding_.b);
  fn("decoder.embed.w", decoder_embedding_.w);
  fn("decoder.embed.b", decoder_embedding_.b);
  for (std::size_t l = 0; l < encoder_layers_.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l);
    visit_attention(prefix + ".self_attn", encoder_layers_[l].self_attention, fn);
    visit_feed_forward(prefix + ".ff", encoder_layers_[l].feed_forward, fn);
  }
  for (std::size_t l = 0; l < decoder_layers_.size(); ++l) {
    const std::string prefix = "decoder.layer" + std::to_string(l);
    visit_attention(prefix + ".self_attn", decoder_layers_[l].self_attention, fn);
    visit_attention(prefix + ".cross_attn", decoder_layers_[l].cross_attention, fn);
    visit_feed_forward(prefix + ".ff", decoder_layers_[l].feed_forward, fn);
  }
  fn("head.w", head_w_);
  fn("head.b", head_b_);
}

std::vector<Tensor> InformerModel::parameters() {
  std::vector<Tensor> out;
  for_each_parameter([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

std::vector<std::pair<std::string, Tensor>> InformerModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  for_each_parameter(
      [&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

long InformerModel::parameter_count() const {
  long count = 0;
  const_cast<InformerModel*>(this)->for_each_parameter(
      [&](const std::string&, Tensor& t) { count += t.size(); });
  return count;
}

Tensor InformerModel::encode(const WindowSample& sample,
                             const ForwardOptions& opts) const {
  const std::size_t expected = std::size_t(config_.t_x) * config_.n_features;
  if (sample.encoder_normalized.size() != expected) {
    throw std::invalid_argument(
        "encode: sample lacks normalized encoder features (expected " +
        std::to_string(expected) + " values, got " +
        std::to_string(sample.encoder_normalized.size()) + ")");
  }
  Rng fallback(0);
  Rng& rng = opts.rng ? *opts.rng : fallback;
  Tensor tokens =
      Tensor::from(config_.t_x, config_.n_features, sample.encoder_normalized);
  Tensor x = add(add(matmul(tokens, encoder_embedding_.w), encoder_embedding_.b),
                 encoder_pe_);
  x = dropout(x, config_.dropout, rng, opts.training);
  for (const auto& layer : encoder_layers_) {
    x = multi_head_attention(x, x, layer.self_attention, config_.n_heads,
                             config_.attention, config_.sparsity_factor,
                             /*causal=*/false, config_.dropout, opts, fallback);
    x = feed_forward(x, layer.feed_forward, config_.dropout, opts, fallback);
    if (config_.distilling) x = max_pool_1d(x, 2);
  }
  return x;
}

InformerModel::DecoderInput InformerModel::build_decoder_input(
    const WindowSample& sample) const {
  if (sample.decoder_known_normalized.size() != std::size_t(config_.t_label)) {
    throw std::invalid_argument(
        "build_decoder_input: sample lacks normalized label values");
  }
  std::vector<double> values(std::size_t(config_.decoder_length()), 0.0);
  std::vector<bool> known(values.size(), false);
  for (int i = 0; i < config_.t_label; ++i) {
    values[std::size_t(i)] = sample.decoder_known_normalized[std::size_t(i)];
    known[std::size_t(i)] = true;
  }
  return {Tensor::column(std::move(values)), std::move(known)};
}

Tensor InformerModel::decode(const Tensor& encoder_output,
                             const Tensor& decoder_values,
                             const ForwardOptions& opts) const {
  if (decoder_values.rows() != config_.decoder_length() ||
      decoder_values.cols() != 1) {
    throw std::invalid_argument("decode: decoder input must be (t_label+t_y) x 1");
  }
  Rng fallback(1);
  Rng& rng = opts.rng ? *opts.rng : fallback;
  Tensor x = add(add(matmul(decoder_values, decoder_embedding_.w),
                     decoder_embedding_.b),
                 decoder_pe_);
  x = dropout(x, config_.dropout, rng, opts.training);
  for (const auto& layer : decoder_layers_) {
    x = multi_head_attention(x, x, layer.self_attention, config_.n_heads,
                             AttentionKind::kFull, config_.sparsity_factor,
                             /*causal=*/true, config_.dropout, opts, fallback);
    x = multi_head_attention(x, encoder_output, layer.cross_attention,
                             config_.n_heads, AttentionKind::kFull,
                             config_.sparsity_factor, /*causal=*/false,
                             config_.dropout, opts, fallback);
    x = feed_forward(x, layer.feed_forward, config_.dropout, opts, fallback);
  }
  Tensor predictions = add(matmul(x, head_w_), head_b_);
  return slice_rows(predictions, config_.t_label, config_.decoder_length());
}

Tensor InformerModel::forward_normalized(const WindowSample& sample,
                                         const ForwardOptions& opts) const {
  const Tensor memory = encode(sample, opts);
  const DecoderInput decoder_input = build_decoder_input(sample);
  return decode(memory, decoder_input.values, opts);
}

}  // namespace optlab
