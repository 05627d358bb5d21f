#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "optlab/data_pipeline.hpp"
#include "optlab/forecaster.hpp"
#include "optlab/informer.hpp"
#include "optlab/tensor.hpp"

namespace optlab {

struct TrainConfig {
  int batch_size = 64;
  int max_epochs = 300;
  double learning_rate = 1e-4;
  int patience = 30;
  double improvement_threshold = 1e-8;
  std::uint64_t seed = 0;
  // Per-horizon-step loss weights; empty means uniform.
  std::vector<double> loss_weights;

  void validate() const;
};

// Sum_h w_h (pred_h - target_h)^2 / Sum_h w_h over t_y x 1 tensors,
// computed in normalized target space.
Tensor weighted_mse(const Tensor& pred, const Tensor& target,
                    const std::vector<double>& weights);

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step();       // consumes the gradients currently on the parameters
  void zero_grad();  // clears all parameter gradients
  long timestep() const { return t_; }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // one entry per completed epoch
  std::vector<double> val_loss;
  int best_epoch = -1;  // index into the vectors above
  double best_val_loss = 0.0;
  std::string stop_reason;  // "early_stopping" or "max_epochs"
};

// Mean weighted MSE over the given samples in eval mode.
double evaluate_loss(const TrainableForecaster& model,
                     const std::vector<WindowSample>& samples,
                     const std::vector<double>& weights);

// Mini-batch Adam loop with seeded shuffling, dropout active only in
// training passes, and early stopping on validation loss (no improvement
// beyond the threshold for `patience` epochs). The model is left holding
// the parameters of the best validation epoch. `progress`, when given,
// receives one "epoch=... train_loss=... val_loss=..." line per epoch.
TrainHistory train_model(TrainableForecaster& model, const DatasetSplit& split,
                         const TrainConfig& config,
                         std::ostream* progress = nullptr);

// Candidate values for the tuned hyper-parameters; every list must be
// non-empty.
struct SearchSpace {
  std::vector<int> n_encoder_layers{1};
  std::vector<int> n_decoder_layers{2};
  std::vector<int> n_heads{3};
  std::vector<int> d_model{32};
  std::vector<double> learning_rate{1e-4};
  std::vector<double> dropout{0.06};
};

struct TrialRecord {
  ModelConfig model_config;
  TrainConfig train_config;
  double best_val_loss = 0.0;
  long parameter_count = 0;
};

struct SearchResult {
  ModelConfig model_config;  // winning draw
  TrainConfig train_config;
  double best_val_loss = 0.0;
  long parameter_count = 0;
  std::vector<TrialRecord> trials;
};

// n_trials uniform seeded draws, each trained with max_epochs capped at
// budget_epochs; ranked by best validation loss, ties broken by fewer
// parameters.
SearchResult random_search(const SearchSpace& space, const DatasetSplit& split,
                           const ModelConfig& base_model,
                           const TrainConfig& base_train, int n_trials,
                           int budget_epochs, std::uint64_t seed,
                           std::ostream* progress = nullptr);

}  // namespace optlab
