#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optlab/data_pipeline.hpp"
#include "optlab/forecaster.hpp"
#include "optlab/rng.hpp"
#include "optlab/tensor.hpp"

namespace optlab {

struct LstmConfig {
  int t_x = 30;
  int t_y = 30;
  int n_features = kNumFeatures;
  int hidden_size = 32;

  void validate() const;
};

// Standard gate parameters; per gate: input weights (n_features x hidden),
// recurrent weights (hidden x hidden), bias (1 x hidden).
struct LstmParameters {
  Tensor w_xi, w_hi, b_i;  // input gate
  Tensor w_xf, w_hf, b_f;  // forget gate
  Tensor w_xg, w_hg, b_g;  // candidate
  Tensor w_xo, w_ho, b_o;  // output gate
  Tensor head_w, head_b;   // hidden -> t_y
};

// One cell update. x_t is 1 x n_features; h and c are 1 x hidden.
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h,
                                    const Tensor& c, const LstmParameters& p);

// Single-layer LSTM over the encoder features; a linear head on the final
// hidden state emits all t_y normalized predictions at once.
class LstmModel : public TrainableForecaster {
 public:
  LstmModel(const LstmConfig& config, Rng init_rng);

  const LstmConfig& config() const { return config_; }
  const LstmParameters& lstm_parameters() const { return params_; }

  std::string name() const override { return "lstm"; }
  std::vector<Tensor> parameters() override;
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  long parameter_count() const override;

  Tensor forward_normalized(const WindowSample& sample,
                            const ForwardOptions& opts = {}) const override;

 private:
  LstmConfig config_;
  LstmParameters params_;
};

}  // namespace optlab
