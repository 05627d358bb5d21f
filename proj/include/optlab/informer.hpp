#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "optlab/data_pipeline.hpp"
#include "optlab/forecaster.hpp"
#include "optlab/rng.hpp"
#include "optlab/tensor.hpp"

namespace optlab {

enum class AttentionKind { kFull, kProbSparse };

struct ModelConfig {
  int t_x = 30;       // encoder input length
  int t_y = 30;       // prediction length
  int t_label = 5;    // observed prefix of the decoder input
  int n_features = kNumFeatures;
  int d_model = 32;
  int n_heads = 3;
  int n_encoder_layers = 1;
  int n_decoder_layers = 2;
  int d_ff = 8;
  double dropout = 0.06;
  AttentionKind attention = AttentionKind::kFull;
  int sparsity_factor = 3;
  bool distilling = true;

  int head_dim() const { return d_model / n_heads; }
  int decoder_length() const { return t_label + t_y; }
  // Sequence length leaving the encoder stack (halved per distilling pool).
  int encoder_output_length() const;
  void validate() const;
};

// ---- building blocks (exposed for targeted tests) ----

// Softmax(Q K^T / sqrt(d_k)) V for one head. With `causal`, position i
// attends only to j <= i via an additive -1e30 mask before the softmax.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            bool causal = false,
                            std::vector<Tensor>* attention_weights = nullptr);

// Max-minus-mean sparsity measurement of each query against the sampled
// key rows, on raw score values (no graph).
std::vector<double> sparsity_scores(const Tensor& q, const Tensor& k,
                                    const std::vector<int>& sampled_keys);

// ProbSparse attention: the top-u queries by sparsity score (u =
// min(L_q, factor * ceil(log2 L_q))) get exact softmax attention over all
// keys; the rest fall back to the mean of the value rows.
Tensor probsparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            int factor, Rng& rng,
                            std::vector<Tensor>* attention_weights = nullptr);
int probsparse_top_u(int l_q, int factor);
// Keys sampled for the measurement: min(L_k, max(1, factor * ceil(log2 L_k))).
int probsparse_sample_count(int l_k, int factor);

// Sinusoidal positional encoding table, length x d_model, no gradient.
Tensor positional_encoding(int length, int d_model);

// ---- parameter bundles ----

struct AttentionParams {
  std::vector<Tensor> w_q, w_k, w_v;  // one d_model x head_dim each per head
  Tensor w_o, b_o;                    // (n_heads*head_dim) x d_model, 1 x d_model
  Tensor ln_gain, ln_bias;            // 1 x d_model
};

struct FeedForwardParams {
  Tensor w1, b1;          // d_model x d_ff, 1 x d_ff
  Tensor w2, b2;          // d_ff x d_model, 1 x d_model
  Tensor ln_gain, ln_bias;
};

struct EmbeddingParams {
  Tensor w, b;  // n_inputs x d_model, 1 x d_model
};

struct EncoderLayerParams {
  AttentionParams self_attention;
  FeedForwardParams feed_forward;
};

struct DecoderLayerParams {
  AttentionParams self_attention;   // causal
  AttentionParams cross_attention;  // queries from decoder, keys/values encoder
  FeedForwardParams feed_forward;
};

// Residual sublayers used by both stacks, exposed for gradient checks.
// Both compute layer_norm(x + dropout(sublayer)) per the post-norm layout.
Tensor multi_head_attention(const Tensor& x, const Tensor& memory,
                            const AttentionParams& params, int n_heads,
                            AttentionKind kind, int factor, bool causal,
                            double dropout_rate, const ForwardOptions& opts,
                            Rng& fallback_rng);
Tensor feed_forward(const Tensor& x, const FeedForwardParams& params,
                    double dropout_rate, const ForwardOptions& opts,
                    Rng& fallback_rng);

class InformerModel : public TrainableForecaster {
 public:
  // Weights drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from init_rng;
  // biases zero, layer-norm gains one.
  InformerModel(const ModelConfig& config, Rng init_rng);

  const ModelConfig& config() const { return config_; }

  std::string name() const override { return "informer"; }
  std::vector<Tensor> parameters() override;
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  long parameter_count() const override;

  // Encoder stack output: encoder_output_length() x d_model.
  Tensor encode(const WindowSample& sample, const ForwardOptions& opts = {}) const;

  // Decoder input column [last t_label observed targets; t_y zeros],
  // with a mask marking which positions carry observed values.
  struct DecoderInput {
    Tensor values;            // (t_label + t_y) x 1
    std::vector<bool> known;  // true for the observed prefix
  };
  DecoderInput build_decoder_input(const WindowSample& sample) const;

  // Decoder stack + output head over a prebuilt encoder output.
  Tensor decode(const Tensor& encoder_output, const Tensor& decoder_values,
                const ForwardOptions& opts = {}) const;

  // Normalized-space predictions, t_y x 1.
  Tensor forward_normalized(const WindowSample& sample,
                            const ForwardOptions& opts = {}) const override;

 private:
  void for_each_parameter(
      const std::function<void(const std::string&, Tensor&)>& fn);

  ModelConfig config_;
  EmbeddingParams encoder_embedding_;
  EmbeddingParams decoder_embedding_;
  std::vector<EncoderLayerParams> encoder_layers_;
  std::vector<DecoderLayerParams> decoder_layers_;
  Tensor head_w_, head_b_;  // d_model x 1, 1 x 1
  Tensor encoder_pe_, decoder_pe_;
};

}  // namespace optlab
