#include <cmath>
#include <vector>

#include "doctest.h"
#include "optlab/lstm.hpp"
#include "optlab/rng.hpp"

using namespace optlab;

namespace {

WindowSample make_sample(const LstmConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WindowSample w;
  w.t_x = cfg.t_x;
  w.t_y = cfg.t_y;
  w.encoder_normalized.resize(std::size_t(cfg.t_x) * cfg.n_features);
  for (auto& v : w.encoder_normalized) v = rng.uniform();
  return w;
}

Tensor random_tensor(int rows, int cols, Rng& rng, bool requires_grad = false) {
  std::vector<double> data(std::size_t(rows) * cols);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor::from(rows, cols, std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("lstm forward emits t_y finite values") {
  LstmConfig cfg;
  LstmModel model(cfg, Rng(4));
  auto sample = make_sample(cfg, 1);
  auto pred = model.forward_normalized(sample);
  REQUIRE(pred.rows() == 30);
  REQUIRE(pred.cols() == 1);
  for (double v : pred.data()) CHECK(std::isfinite(v));

  // eval determinism
  auto again = model.forward_normalized(sample);
  for (int i = 0; i < pred.size(); ++i)
    CHECK(pred.data()[std::size_t(i)] == again.data()[std::size_t(i)]);
}

TEST_CASE("all-zero weights collapse to the head bias") {
  LstmConfig cfg;
  LstmModel model(cfg, Rng(4));
  for (auto& [name, p] : model.named_parameters()) {
    if (name == "lstm.head_b") {
      std::vector<double> bias(std::size_t(p.size()));
      for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 0.25 * double(i);
      p.apply_update(bias);
    } else {
      p.apply_update(std::vector<double>(std::size_t(p.size()), 0.0));
    }
  }
  auto pred = model.forward_normalized(make_sample(cfg, 2));
  for (int i = 0; i < 30; ++i)
    CHECK(pred.at(i, 0) == doctest::Approx(0.25 * i).epsilon(1e-15));
}

TEST_CASE("gradient check through 5 unrolled steps") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(700 + seed);
    LstmParameters p;
    const int f = 3, h = 4, t_y = 2;
    auto gate = [&](Tensor& w_x, Tensor& w_h, Tensor& b) {
      w_x = random_tensor(f, h, rng, true);
      w_h = random_tensor(h, h, rng, true);
      b = random_tensor(1, h, rng, true);
    };
    gate(p.w_xi, p.w_hi, p.b_i);
    gate(p.w_xf, p.w_hf, p.b_f);
    gate(p.w_xg, p.w_hg, p.b_g);
    gate(p.w_xo, p.w_ho, p.b_o);
    p.head_w = random_tensor(h, t_y, rng, true);
    p.head_b = random_tensor(1, t_y, rng, true);

    std::vector<Tensor> inputs;
    for (int t = 0; t < 5; ++t) inputs.push_back(random_tensor(1, f, rng, true));

    std::vector<Tensor> leaves{p.w_xi, p.w_hi, p.b_i,    p.w_xf, p.w_hf,
                               p.b_f,  p.w_xg, p.w_hg,   p.b_g,  p.w_xo,
                               p.w_ho, p.b_o,  p.head_w, p.head_b};
    for (auto& x : inputs) leaves.push_back(x);

    const double err = grad_check(
        [&]() {
          Tensor hh = Tensor::zeros(1, h);
          Tensor cc = Tensor::zeros(1, h);
          for (auto& x : inputs) std::tie(hh, cc) = lstm_cell(x, hh, cc, p);
          return sum_all(add(matmul(hh, p.head_w), p.head_b));
        },
        leaves);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("lstm parameter count matches shape arithmetic") {
  LstmModel model(LstmConfig{}, Rng(9));
  // 4 gates x (6*32 + 32*32 + 32) + head 32*30 + 30
  CHECK(model.parameter_count() == 4 * (6 * 32 + 32 * 32 + 32) + 32 * 30 + 30);
  CHECK(model.parameter_count() == 5982);
}

TEST_CASE("lstm gradients reach every parameter") {
  LstmConfig cfg;
  LstmModel model(cfg, Rng(10));
  auto sample = make_sample(cfg, 3);
  backward(sum_all(model.forward_normalized(sample)));
  for (auto& [name, p] : model.named_parameters()) {
    double norm = 0;
    for (double g : p.grad()) norm += std::abs(g);
    INFO("parameter ", name);
    CHECK(norm > 0.0);
    p.zero_grad();
  }
}

TEST_CASE("lstm config validation") {
  LstmConfig cfg;
  cfg.hidden_size = 0;
  CHECK_THROWS(LstmModel(cfg, Rng(1)));
}
