#include "optlab/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace optlab {

namespace {

Tensor init_matrix(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(rows));
  std::vector<double> data(std::size_t(rows) * cols);
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true);
}

}  // namespace

void LstmConfig::validate() const {
  if (t_x < 1 || t_y < 1 || n_features < 1 || hidden_size < 1) {
    throw std::invalid_argument("LstmConfig: dimensions must be positive");
  }
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x_t, const Tensor& h,
                                    const Tensor& c, const LstmParameters& p) {
  const Tensor i = sigmoid(add(add(matmul(x_t, p.w_xi), matmul(h, p.w_hi)), p.b_i));
  const Tensor f = sigmoid(add(add(matmul(x_t, p.w_xf), matmul(h, p.w_hf)), p.b_f));
  const Tensor g = tanh_of(add(add(matmul(x_t, p.w_xg), matmul(h, p.w_hg)), p.b_g));
  const Tensor o = sigmoid(add(add(matmul(x_t, p.w_xo), matmul(h, p.w_ho)), p.b_o));
  const Tensor c_next = add(mul(f, c), mul(i, g));
  const Tensor h_next = mul(o, tanh_of(c_next));
  return {h_next, c_next};
}

LstmModel::LstmModel(const LstmConfig& config, Rng init_rng) : config_(config) {
  config_.validate();
  const int f = config_.n_features;
  const int h = config_.hidden_size;
  auto gate = [&](Tensor& w_x, Tensor& w_h, Tensor& b) {
    w_x = init_matrix(f, h, init_rng);
    w_h = init_matrix(h, h, init_rng);
    b = Tensor::zeros(1, h, /*requires_grad=*/true);
  };
  gate(params_.w_xi, params_.w_hi, params_.b_i);
  gate(params_.w_xf, params_.w_hf, params_.b_f);
  gate(params_.w_xg, params_.w_hg, params_.b_g);
  gate(params_.w_xo, params_.w_ho, params_.b_o);
  params_.head_w = init_matrix(h, config_.t_y, init_rng);
  params_.head_b = Tensor::zeros(1, config_.t_y, /*requires_grad=*/true);
}

std::vector<std::pair<std::string, Tensor>> LstmModel::named_parameters() {
  return {
      {"lstm.w_xi", params_.w_xi}, {"lstm.w_hi", params_.w_hi},
      {"lstm.b_i", params_.b_i},   {"lstm.w_xf", params_.w_xf},
      {"lstm.w_hf", params_.w_hf}, {"lstm.b_f", params_.b_f},
      {"lstm.w_xg", params_.w_xg}, {"lstm.w_hg", params_.w_hg},
      {"lstm.b_g", params_.b_g},   {"lstm.w_xo", params_.w_xo},
      {"lstm.w_ho", params_.w_ho}, {"lstm.b_o", params_.b_o},
      {"lstm.head_w", params_.head_w}, {"lstm.head_b", params_.head_b},
  };
}

std::vector<Tensor> LstmModel::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

long LstmModel::parameter_count() const {
  long count = 0;
  for (auto& [name, t] : const_cast<LstmModel*>(this)->named_parameters()) {
    count += t.size();
  }
  return count;
}

Tensor LstmModel::forward_normalized(const WindowSample& sample,
                                     const ForwardOptions&) const {
  const std::size_t expected = std::size_t(config_.t_x) * config_.n_features;
  if (sample.encoder_normalized.size() != expected) {
    throw std::invalid_argument(
        "lstm forward: sample lacks normalized encoder features");
  }
  Tensor h = Tensor::zeros(1, config_.hidden_size);
  Tensor c = Tensor::zeros(1, config_.hidden_size);
  for (int t = 0; t < config_.t_x; ++t) {
    const auto begin =
        sample.encoder_normalized.begin() + long(t) * config_.n_features;
    Tensor x_t = Tensor::row({begin, begin + config_.n_features});
    std::tie(h, c) = lstm_cell(x_t, h, c, params_);
  }
  return transpose(add(matmul(h, params_.head_w), params_.head_b));
}

}  // namespace optlab
