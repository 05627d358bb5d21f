#include "optlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace optlab {

namespace {

std::vector<double> resolve_weights(const std::vector<double>& weights, int t_y) {
  if (weights.empty()) return std::vector<double>(std::size_t(t_y), 1.0);
  if (int(weights.size()) != t_y) {
    throw std::invalid_argument("loss weights length must match t_y");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("loss weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (sum <= 0.0) throw std::invalid_argument("loss weights must not all be zero");
  return weights;
}

Tensor target_column(const WindowSample& sample) {
  if (sample.target_normalized.empty()) {
    throw std::invalid_argument("sample lacks normalized targets");
  }
  return Tensor::column(sample.target_normalized);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
  if (improvement_threshold < 0.0) {
    throw std::invalid_argument("improvement_threshold must be >= 0");
  }
  if (!loss_weights.empty()) (void)resolve_weights(loss_weights, int(loss_weights.size()));
}

Tensor weighted_mse(const Tensor& pred, const Tensor& target,
                    const std::vector<double>& weights) {
  if (pred.rows() != target.rows() || pred.cols() != 1 || target.cols() != 1) {
    throw std::invalid_argument("weighted_mse: predictions/targets must be equal t_y x 1");
  }
  const std::vector<double> w = resolve_weights(weights, pred.rows());
  const double w_sum = std::accumulate(w.begin(), w.end(), 0.0);
  Tensor diff = sub(pred, target);
  Tensor weighted = mul(mul(diff, diff), Tensor::column(w));
  return scale(sum_all(weighted), 1.0 / w_sum);
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                             double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("AdamOptimizer: learning rate must be > 0");
  }
  for (auto& p : params) {
    if (!p.requires_grad()) {
      throw std::invalid_argument("AdamOptimizer: parameter without gradients");
    }
    Slot slot;
    slot.param = p;
    slot.m.assign(std::size_t(p.size()), 0.0);
    slot.v.assign(std::size_t(p.size()), 0.0);
    slots_.push_back(std::move(slot));
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (auto& slot : slots_) {
    const auto grad = slot.param.grad();
    const auto data = slot.param.data();
    std::vector<double> updated(data.begin(), data.end());
    for (std::size_t i = 0; i < updated.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      updated[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
    slot.param.apply_update(updated);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& slot : slots_) slot.param.zero_grad();
}

double evaluate_loss(const TrainableForecaster& model,
                     const std::vector<WindowSample>& samples,
                     const std::vector<double>& weights) {
  if (samples.empty()) throw std::invalid_argument("evaluate_loss: no samples");
  double total = 0.0;
  for (const auto& sample : samples) {
    const Tensor pred = model.forward_normalized(sample);
    total += weighted_mse(pred, target_column(sample), weights).item();
  }
  return total / double(samples.size());
}

TrainHistory train_model(TrainableForecaster& model, const DatasetSplit& split,
                         const TrainConfig& config, std::ostream* progress) {
  config.validate();
  if (split.train.empty() || split.validation.empty()) {
    throw std::invalid_argument("train_model: train and validation must be non-empty");
  }

  Rng root(config.seed);
  Rng shuffle_rng = root.fork("shuffle");
  Rng dropout_rng = root.fork("dropout");

  std::vector<Tensor> params = model.parameters();
  AdamOptimizer optimizer(params, config.learning_rate);
  const std::size_t n = split.train.size();

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;
  int epochs_without_improvement = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Fisher-Yates pass: every sample exactly once per epoch
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += std::size_t(config.batch_size)) {
      const std::size_t end = std::min(n, begin + std::size_t(config.batch_size));
      optimizer.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const WindowSample& sample = split.train[order[i]];
        ForwardOptions opts;
        opts.training = true;
        opts.rng = &dropout_rng;
        const Tensor pred = model.forward_normalized(sample, opts);
        const Tensor loss =
            weighted_mse(pred, target_column(sample), config.loss_weights);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw std::runtime_error(
              "train_model: non-finite loss at epoch " + std::to_string(epoch + 1) +
              ", sample " + sample.contract_id);
        }
        epoch_loss += value;
        backward(scale(loss, 1.0 / double(end - begin)));
      }
      optimizer.step();
    }
    optimizer.zero_grad();

    const double train_loss = epoch_loss / double(n);
    const double val_loss =
        evaluate_loss(model, split.validation, config.loss_weights);
    if (!std::isfinite(val_loss)) {
      throw std::runtime_error("train_model: non-finite validation loss at epoch " +
                               std::to_string(epoch + 1));
    }
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    if (progress) {
      (*progress) << "epoch=" << (epoch + 1) << " train_loss=" << train_loss
                  << " val_loss=" << val_loss << "\n";
    }

    if (val_loss < best_val - config.improvement_threshold) {
      best_val = val_loss;
      history.best_epoch = epoch;
      epochs_without_improvement = 0;
      best_params.clear();
      for (auto& p : params) {
        best_params.emplace_back(p.data().begin(), p.data().end());
      }
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.patience) {
        history.stop_reason = "early_stopping";
        break;
      }
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";
  history.best_val_loss = best_val;

  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].apply_update(best_params[i]);
  }
  return history;
}

SearchResult random_search(const SearchSpace& space, const DatasetSplit& split,
                           const ModelConfig& base_model,
                           const TrainConfig& base_train, int n_trials,
                           int budget_epochs, std::uint64_t seed,
                           std::ostream* progress) {
  if (n_trials < 1) throw std::invalid_argument("random_search: n_trials must be >= 1");
  if (budget_epochs < 1) {
    throw std::invalid_argument("random_search: budget_epochs must be >= 1");
  }
  if (space.n_encoder_layers.empty() || space.n_decoder_layers.empty() ||
      space.n_heads.empty() || space.d_model.empty() ||
      space.learning_rate.empty() || space.dropout.empty()) {
    throw std::invalid_argument("random_search: every dimension needs candidates");
  }

  Rng draw_rng = Rng(seed).fork("search");
  auto pick = [&](const auto& list) { return list[draw_rng.index(list.size())]; };

  SearchResult result;
  for (int trial = 0; trial < n_trials; ++trial) {
    TrialRecord record;
    record.model_config = base_model;
    record.model_config.n_encoder_layers = pick(space.n_encoder_layers);
    record.model_config.n_decoder_layers = pick(space.n_decoder_layers);
    record.model_config.n_heads = pick(space.n_heads);
    record.model_config.d_model = pick(space.d_model);
    record.model_config.dropout = pick(space.dropout);
    record.train_config = base_train;
    record.train_config.learning_rate = pick(space.learning_rate);
    record.train_config.max_epochs = std::min(base_train.max_epochs, budget_epochs);
    record.train_config.seed =
        Rng(seed).fork("trial" + std::to_string(trial)).next_u64();

    InformerModel model(record.model_config,
                        Rng(record.train_config.seed).fork("init"));
    const TrainHistory history = train_model(model, split, record.train_config);
    record.best_val_loss = history.best_val_loss;
    record.parameter_count = model.parameter_count();
    if (progress) {
      (*progress) << "trial=" << (trial + 1) << " val_loss=" << record.best_val_loss
                  << " params=" << record.parameter_count << "\n";
    }

    const bool better =
        result.trials.empty() || record.best_val_loss < result.best_val_loss ||
        (record.best_val_loss == result.best_val_loss &&
         record.parameter_count < result.parameter_count);
    if (better) {
      result.model_config = record.model_config;
      result.train_config = record.train_config;
      result.best_val_loss = record.best_val_loss;
      result.parameter_count = record.parameter_count;
    }
    result.trials.push_back(std::move(record));
  }
  return result;
}

}  // namespace optlab
