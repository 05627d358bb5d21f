#include <cmath>
#include <vector>

#include "doctest.h"
#include "optlab/informer.hpp"
#include "optlab/rng.hpp"

using namespace optlab;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
  std::vector<double> data(std::size_t(rows) * cols);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor::from(rows, cols, std::move(data), requires_grad);
}

// Sample carrying consistent normalized fields for the given config.
WindowSample make_sample(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WindowSample w;
  w.t_x = cfg.t_x;
  w.t_y = cfg.t_y;
  w.t_label = cfg.t_label;
  w.encoder_normalized.resize(std::size_t(cfg.t_x) * cfg.n_features);
  for (auto& v : w.encoder_normalized) v = rng.uniform();
  w.decoder_known_normalized.resize(std::size_t(cfg.t_label));
  for (auto& v : w.decoder_known_normalized) v = rng.uniform();
  w.target_normalized.resize(std::size_t(cfg.t_y));
  for (auto& v : w.target_normalized) v = rng.uniform();
  w.anchor_price = 5.0;
  return w;
}

// Brute-force single-head attention on raw doubles.
std::vector<double> attention_oracle(const Tensor& q, const Tensor& k,
                                     const Tensor& v) {
  const int lq = q.rows(), lk = k.rows(), d = q.cols(), dv = v.cols();
  std::vector<double> out(std::size_t(lq) * dv, 0.0);
  for (int i = 0; i < lq; ++i) {
    std::vector<double> s(std::size_t(lk), 0.0);
    double mx = -1e300;
    for (int j = 0; j < lk; ++j) {
      double dot = 0;
      for (int c = 0; c < d; ++c) dot += q.at(i, c) * k.at(j, c);
      s[std::size_t(j)] = dot / std::sqrt(double(d));
      mx = std::max(mx, s[std::size_t(j)]);
    }
    double z = 0;
    for (double& x : s) {
      x = std::exp(x - mx);
      z += x;
    }
    for (int j = 0; j < lk; ++j)
      for (int c = 0; c < dv; ++c)
        out[std::size_t(i) * dv + c] += s[std::size_t(j)] / z * v.at(j, c);
  }
  return out;
}

}  // namespace

TEST_CASE("scaled_dot_attention basics") {
  SUBCASE("single key returns the value row for any query") {
    auto q = Tensor::from(2, 1, {3.0, -5.0});
    auto k = Tensor::from(1, 1, {0.7});
    auto v = Tensor::from(1, 1, {2.0});
    auto out = scaled_dot_attention(q, k, v);
    CHECK(out.at(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
  }

  SUBCASE("two identical keys average the value rows") {
    auto q = Tensor::from(1, 2, {0.4, -1.2});
    auto k = Tensor::from(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto v = Tensor::from(2, 3, {1, 2, 3, 5, 6, 7});
    auto out = scaled_dot_attention(q, k, v);
    CHECK(out.at(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(out.at(0, 1) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(out.at(0, 2) == doctest::Approx(5.0).epsilon(1e-14));
  }

  SUBCASE("random case matches brute-force evaluation") {
    Rng rng(11);
    auto q = random_tensor(3, 2, rng);
    auto k = random_tensor(3, 2, rng);
    auto v = random_tensor(3, 2, rng);
    auto out = scaled_dot_attention(q, k, v);
    auto expected = attention_oracle(q, k, v);
    for (int i = 0; i < out.size(); ++i)
      CHECK(std::abs(out.data()[std::size_t(i)] -
                     expected[std::size_t(i)]) < 1e-10);
  }

  SUBCASE("key/value length mismatch throws") {
    auto q = Tensor::from(1, 2, {1, 2});
    auto k = Tensor::from(2, 2, {1, 2, 3, 4});
    auto v = Tensor::from(3, 1, {1, 2, 3});
    CHECK_THROWS(scaled_dot_attention(q, k, v));
  }
}

TEST_CASE("causal mask blocks information flow from later positions") {
  Rng rng(5);
  auto k = random_tensor(4, 3, rng);
  auto v = random_tensor(4, 2, rng);
  auto q = random_tensor(4, 3, rng);
  auto base = scaled_dot_attention(q, k, v, /*causal=*/true);

  // perturb key/value row 3; rows 0..2 of the output must not move
  std::vector<double> k2(k.data().begin(), k.data().end());
  std::vector<double> v2(v.data().begin(), v.data().end());
  for (int c = 0; c < 3; ++c) k2[std::size_t(3 * 3 + c)] += 10.0;
  for (int c = 0; c < 2; ++c) v2[std::size_t(3 * 2 + c)] -= 7.0;
  auto moved = scaled_dot_attention(q, Tensor::from(4, 3, std::move(k2)),
                                    Tensor::from(4, 2, std::move(v2)),
                                    /*causal=*/true);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 2; ++c) CHECK(base.at(i, c) == moved.at(i, c));
  // row 3 does move (sanity that the perturbation was visible)
  CHECK(base.at(3, 0) != moved.at(3, 0));
}

TEST_CASE("masked attention rows still sum to one over allowed support") {
  Rng rng(6);
  auto q = random_tensor(5, 4, rng, false, -100, 100);
  auto k = random_tensor(5, 4, rng, false, -100, 100);
  auto v = random_tensor(5, 4, rng);
  std::vector<Tensor> weights;
  (void)scaled_dot_attention(q, k, v, /*causal=*/true, &weights);
  REQUIRE(weights.size() == 1);
  for (int i = 0; i < 5; ++i) {
    double sum = 0;
    for (int j = 0; j < 5; ++j) {
      sum += weights[0].at(i, j);
      if (j > i) CHECK(weights[0].at(i, j) == 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sparsity_scores hand cases") {
  SUBCASE("query orthogonal to all sampled keys") {
    auto q = Tensor::from(1, 2, {1.0, 0.0});
    auto k = Tensor::from(3, 2, {0, 1, 0, 2, 0, -1});
    auto m = sparsity_scores(q, k, {0, 1, 2});
    CHECK(m[0] == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("uniform scores give zero measurement") {
    auto q = Tensor::from(1, 1, {2.0});
    auto k = Tensor::from(3, 1, {0.7, 0.7, 0.7});
    auto m = sparsity_scores(q, k, {0, 1, 2});
    CHECK(m[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("scores [3,0,0] measure max minus mean = 2") {
    // d_k = 1 so the 1/sqrt(d_k) factor is 1
    auto q = Tensor::from(1, 1, {1.0});
    auto k = Tensor::from(3, 1, {3.0, 0.0, 0.0});
    auto m = sparsity_scores(q, k, {0, 1, 2});
    CHECK(m[0] == doctest::Approx(2.0).epsilon(1e-14));
  }

  SUBCASE("nonnegative for every query") {
    Rng rng(8);
    auto q = random_tensor(6, 3, rng);
    auto k = random_tensor(9, 3, rng);
    for (double v : sparsity_scores(q, k, {0, 2, 4, 6, 8}))
      CHECK(v >= -1e-15);
  }

  SUBCASE("empty sample set throws") {
    auto q = Tensor::from(1, 1, {1.0});
    auto k = Tensor::from(1, 1, {1.0});
    CHECK_THROWS(sparsity_scores(q, k, {}));
  }
}

TEST_CASE("probsparse selection sizes") {
  // u = min(L, factor * ceil(log2 L))
  CHECK(probsparse_top_u(1, 3) == 0);
  CHECK(probsparse_top_u(4, 3) == 4);
  CHECK(probsparse_top_u(7, 3) == 7);
  CHECK(probsparse_top_u(8, 3) == 8);
  CHECK(probsparse_top_u(64, 1) == 6);
  CHECK(probsparse_sample_count(1, 3) == 1);
  CHECK(probsparse_sample_count(64, 1) == 6);
}

TEST_CASE("probsparse equals full attention exhaustively for L in 1..8") {
  for (int l = 1; l <= 8; ++l) {
    Rng rng(100 + std::uint64_t(l));
    auto q = random_tensor(l, 4, rng);
    auto k = random_tensor(l, 4, rng);
    auto v = random_tensor(l, 3, rng);
    auto full = scaled_dot_attention(q, k, v);
    Rng sample_rng(7);
    auto sparse = probsparse_attention(q, k, v, 3, sample_rng);
    REQUIRE(sparse.rows() == full.rows());
    REQUIRE(sparse.cols() == full.cols());
    for (int i = 0; i < full.size(); ++i)
      CHECK(sparse.data()[std::size_t(i)] == full.data()[std::size_t(i)]);
  }
}

TEST_CASE("probsparse L=64 factor=1: active rows exact, lazy rows mean of V") {
  Rng rng(55);
  auto q = random_tensor(64, 8, rng);
  auto k = random_tensor(64, 8, rng);
  auto v = random_tensor(64, 4, rng);
  auto full = scaled_dot_attention(q, k, v);
  Rng sample_rng(3);
  auto sparse = probsparse_attention(q, k, v, 1, sample_rng);

  std::vector<double> v_mean(4, 0.0);
  for (int j = 0; j < 64; ++j)
    for (int c = 0; c < 4; ++c) v_mean[std::size_t(c)] += v.at(j, c) / 64.0;

  int active = 0, lazy = 0;
  for (int i = 0; i < 64; ++i) {
    bool is_active = true;
    for (int c = 0; c < 4; ++c)
      if (std::abs(sparse.at(i, c) - full.at(i, c)) > 1e-12) is_active = false;
    bool is_lazy = true;
    for (int c = 0; c < 4; ++c)
      if (std::abs(sparse.at(i, c) - v_mean[std::size_t(c)]) > 1e-12)
        is_lazy = false;
    CHECK((is_active || is_lazy));
    (is_active ? active : lazy) += 1;
  }
  CHECK(active == probsparse_top_u(64, 1));
  CHECK(lazy == 64 - probsparse_top_u(64, 1));
}

TEST_CASE("positional encoding separates positions") {
  auto pe = positional_encoding(40, 32);
  REQUIRE(pe.rows() == 40);
  REQUIRE(pe.cols() == 32);
  for (int a = 0; a < 40; ++a) {
    for (int b = a + 1; b < 40; ++b) {
      double diff = 0;
      for (int c = 0; c < 32; ++c) diff += std::abs(pe.at(a, c) - pe.at(b, c));
      CHECK(diff > 1e-6);
    }
  }
  for (double v : pe.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("multi_head_attention shape and gradient") {
  ModelConfig cfg;
  Rng init(42);
  InformerModel model(cfg, init);

  SUBCASE("block output keeps (L, d_model)") {
    Rng rng(1);
    auto x = random_tensor(8, 32, rng);
    AttentionParams params;
    Rng prng(2);
    for (int h = 0; h < 3; ++h) {
      params.w_q.push_back(random_tensor(32, 10, prng, true));
      params.w_k.push_back(random_tensor(32, 10, prng, true));
      params.w_v.push_back(random_tensor(32, 10, prng, true));
    }
    params.w_o = random_tensor(30, 32, prng, true);
    params.b_o = Tensor::zeros(1, 32, true);
    params.ln_gain = Tensor::from(1, 32, std::vector<double>(32, 1.0), true);
    params.ln_bias = Tensor::zeros(1, 32, true);
    ForwardOptions opts;
    Rng fallback(0);
    auto out = multi_head_attention(x, x, params, 3, AttentionKind::kFull, 3,
                                    false, 0.0, opts, fallback);
    CHECK(out.rows() == 8);
    CHECK(out.cols() == 32);
  }

  SUBCASE("gradient check on an 8x32 input block") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(900 + seed);
      AttentionParams params;
      for (int h = 0; h < 2; ++h) {
        params.w_q.push_back(random_tensor(6, 3, rng, true));
        params.w_k.push_back(random_tensor(6, 3, rng, true));
        params.w_v.push_back(random_tensor(6, 3, rng, true));
      }
      params.w_o = random_tensor(6, 6, rng, true);
      params.b_o = random_tensor(1, 6, rng, true);
      params.ln_gain = random_tensor(1, 6, rng, true, 0.5, 1.5);
      params.ln_bias = random_tensor(1, 6, rng, true);
      auto x = random_tensor(4, 6, rng, true);

      std::vector<Tensor> leaves{x, params.w_o, params.b_o, params.ln_gain,
                                 params.ln_bias};
      for (int h = 0; h < 2; ++h) {
        leaves.push_back(params.w_q[std::size_t(h)]);
        leaves.push_back(params.w_k[std::size_t(h)]);
        leaves.push_back(params.w_v[std::size_t(h)]);
      }
      ForwardOptions opts;
      Rng fallback(0);
      const double err = grad_check(
          [&]() {
            return sum_all(multi_head_attention(x, x, params, 2,
                                                AttentionKind::kFull, 3, false,
                                                0.0, opts, fallback));
          },
          leaves);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("feed_forward block semantics") {
  SUBCASE("zero weights reduce the block to layer norm of x") {
    FeedForwardParams p;
    p.w1 = Tensor::zeros(3, 2, true);
    p.b1 = Tensor::zeros(1, 2, true);
    p.w2 = Tensor::zeros(2, 3, true);
    p.b2 = Tensor::zeros(1, 3, true);
    p.ln_gain = Tensor::from(1, 3, {1, 1, 1}, true);
    p.ln_bias = Tensor::zeros(1, 3, true);
    auto x = Tensor::from(2, 3, {1, 2, 3, -1, 0, 1});
    ForwardOptions opts;
    Rng fallback(0);
    auto out = feed_forward(x, p, 0.0, opts, fallback);
    auto expected = layer_norm_rows(x, p.ln_gain, p.ln_bias);
    for (int i = 0; i < out.size(); ++i)
      CHECK(out.data()[std::size_t(i)] ==
            doctest::Approx(expected.data()[std::size_t(i)]).epsilon(1e-14));
  }

  SUBCASE("gradient check") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(300 + seed);
      FeedForwardParams p;
      p.w1 = random_tensor(5, 3, rng, true);
      p.b1 = random_tensor(1, 3, rng, true);
      p.w2 = random_tensor(3, 5, rng, true);
      p.b2 = random_tensor(1, 5, rng, true);
      p.ln_gain = random_tensor(1, 5, rng, true, 0.5, 1.5);
      p.ln_bias = random_tensor(1, 5, rng, true);
      auto x = random_tensor(4, 5, rng, true);
      std::vector<Tensor> leaves{x,    p.w1,      p.b1,     p.w2,
                                 p.b2, p.ln_gain, p.ln_bias};
      ForwardOptions opts;
      Rng fallback(0);
      const double err = grad_check(
          [&]() { return sum_all(feed_forward(x, p, 0.0, opts, fallback)); },
          leaves);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("encoder output shapes") {
  ModelConfig cfg;
  InformerModel model(cfg, Rng(7));
  auto sample = make_sample(cfg, 1);
  auto out = model.encode(sample);
  CHECK(out.rows() == 15);
  CHECK(out.cols() == 32);

  ModelConfig no_distill = cfg;
  no_distill.distilling = false;
  InformerModel flat(no_distill, Rng(7));
  auto out2 = flat.encode(sample);
  CHECK(out2.rows() == 30);
  CHECK(out2.cols() == 32);

  // identical inputs, identical outputs (eval determinism)
  auto again = model.encode(sample);
  for (int i = 0; i < out.size(); ++i)
    CHECK(out.data()[std::size_t(i)] == again.data()[std::size_t(i)]);
}

TEST_CASE("decoder input construction") {
  ModelConfig cfg;
  InformerModel model(cfg, Rng(7));
  auto sample = make_sample(cfg, 2);
  sample.decoder_known_normalized = {1, 2, 3, 4, 5};
  auto dec = model.build_decoder_input(sample);
  REQUIRE(dec.values.rows() == 35);
  REQUIRE(dec.values.cols() == 1);
  for (int i = 0; i < 5; ++i) {
    CHECK(dec.values.at(i, 0) == double(i + 1));
    CHECK(dec.known[std::size_t(i)]);
  }
  for (int i = 5; i < 35; ++i) {
    CHECK(dec.values.at(i, 0) == 0.0);
    CHECK(!dec.known[std::size_t(i)]);
  }

  ModelConfig no_label = cfg;
  no_label.t_label = 0;
  InformerModel bare(no_label, Rng(7));
  auto sample0 = make_sample(no_label, 3);
  auto dec0 = bare.build_decoder_input(sample0);
  REQUIRE(dec0.values.rows() == 30);
  for (int i = 0; i < 30; ++i) CHECK(dec0.values.at(i, 0) == 0.0);
}

TEST_CASE("forward pass shape, repeatability and gradient reach") {
  ModelConfig cfg;
  InformerModel model(cfg, Rng(21));
  auto sample = make_sample(cfg, 4);

  auto pred = model.forward_normalized(sample);
  REQUIRE(pred.rows() == 30);
  REQUIRE(pred.cols() == 1);

  auto pred2 = model.forward_normalized(sample);
  for (int i = 0; i < pred.size(); ++i)
    CHECK(pred.data()[std::size_t(i)] == pred2.data()[std::size_t(i)]);

  // gradient from the summed prediction reaches every parameter tensor
  backward(sum_all(model.forward_normalized(sample)));
  for (auto& [name, param] : model.named_parameters()) {
    double norm = 0;
    for (double g : param.grad()) norm += std::abs(g);
    INFO("parameter ", name);
    CHECK(norm > 0.0);
    param.zero_grad();
  }
}

TEST_CASE("denormalized forecast inverts the normalizer exactly") {
  ModelConfig cfg;
  InformerModel model(cfg, Rng(3));
  auto sample = make_sample(cfg, 9);
  NormalizationParams norm;
  norm.x_min = {0, 0, 0, 0, 0, 2.0};
  norm.x_max = {1, 1, 1, 1, 1, 12.0};
  auto pred = model.forward_normalized(sample);
  auto prices = model.forecast(sample, norm);
  REQUIRE(prices.size() == 30);
  for (int i = 0; i < 30; ++i)
    CHECK(prices[std::size_t(i)] == 2.0 + 10.0 * pred.at(i, 0));
}

TEST_CASE("probsparse configuration runs end to end") {
  ModelConfig cfg;
  cfg.attention = AttentionKind::kProbSparse;
  InformerModel model(cfg, Rng(17));
  auto sample = make_sample(cfg, 5);
  auto pred = model.forward_normalized(sample);
  REQUIRE(pred.rows() == 30);
  for (double v : pred.data()) CHECK(std::isfinite(v));

  // still trainable: gradients flow to the embedding
  backward(sum_all(model.forward_normalized(sample)));
  auto params = model.named_parameters();
  double norm = 0;
  for (double g : params.front().second.grad()) norm += std::abs(g);
  CHECK(norm > 0.0);
  for (auto& [name, p] : params) p.zero_grad();
}

TEST_CASE("parameter count is frozen for the default config") {
  InformerModel model(ModelConfig{}, Rng(1));
  CHECK(model.parameter_count() == 21849);
  CHECK(model.parameters().size() == model.named_parameters().size());

  // pure function of the config: independent of the init seed
  InformerModel other(ModelConfig{}, Rng(999));
  CHECK(other.parameter_count() == 21849);
}

TEST_CASE("config validation") {
  ModelConfig cfg;
  cfg.n_heads = 64;  // head_dim would be 0
  CHECK_THROWS(InformerModel(cfg, Rng(1)));

  ModelConfig bad_drop;
  bad_drop.dropout = 1.0;
  CHECK_THROWS(InformerModel(bad_drop, Rng(1)));

  ModelConfig bad_label;
  bad_label.t_label = bad_label.t_x + 1;
  CHECK_THROWS(InformerModel(bad_label, Rng(1)));
}

TEST_CASE("training mode dropout perturbs outputs, eval does not") {
  ModelConfig cfg;
  InformerModel model(cfg, Rng(33));
  auto sample = make_sample(cfg, 6);
  Rng rng_a(1), rng_b(2);
  ForwardOptions train_a{true, &rng_a, nullptr};
  ForwardOptions train_b{true, &rng_b, nullptr};
  auto a = model.forward_normalized(sample, train_a);
  auto b = model.forward_normalized(sample, train_b);
  double diff = 0;
  for (int i = 0; i < a.size(); ++i)
    diff += std::abs(a.data()[std::size_t(i)] - b.data()[std::size_t(i)]);
  CHECK(diff > 0.0);
}
