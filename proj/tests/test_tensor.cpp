#include <cmath>
#include <vector>

#include "doctest.h"
#include "optlab/tensor.hpp"

using namespace optlab;

namespace {

Tensor random_tensor(int m, int n, Rng& rng, bool requires_grad = false,
                     double scale = 1.0) {
  std::vector<double> data(std::size_t(m) * n);
  for (auto& v : data) v = rng.uniform(-scale, scale);
  return Tensor::from(m, n, std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("matmul basics") {
  auto I = Tensor::from(2, 2, {1, 0, 0, 1});
  auto A = Tensor::from(2, 2, {1, 2, 3, 4});
  auto IA = matmul(I, A);
  CHECK(IA.data()[0] == 1);
  CHECK(IA.data()[1] == 2);
  CHECK(IA.data()[2] == 3);
  CHECK(IA.data()[3] == 4);

  auto z = matmul(I, Tensor::from(2, 1, {0, 0}));
  CHECK(z.data()[0] == 0);
  CHECK(z.data()[1] == 0);

  // hand expansion: [[1,2],[3,4]] x [[5],[6]] = [[17],[39]]
  auto v = matmul(A, Tensor::from(2, 1, {5, 6}));
  CHECK(v.at(0, 0) == doctest::Approx(17).epsilon(1e-15));
  CHECK(v.at(1, 0) == doctest::Approx(39).epsilon(1e-15));
}

TEST_CASE("matmul rejects dimension mismatch") {
  auto a = Tensor::zeros(2, 3);
  auto b = Tensor::zeros(2, 3);
  CHECK_THROWS_AS((void)matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul associativity on random 4x4") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto A = random_tensor(4, 4, rng);
    auto B = random_tensor(4, 4, rng);
    auto C = random_tensor(4, 4, rng);
    auto left = matmul(matmul(A, B), C);
    auto right = matmul(A, matmul(B, C));
    for (int i = 0; i < 16; ++i)
      CHECK(std::abs(left.data()[i] - right.data()[i]) < 1e-9);
  }
}

TEST_CASE("softmax_rows values") {
  auto flat = softmax_rows(Tensor::from(1, 3, {0, 0, 0}));
  for (int j = 0; j < 3; ++j)
    CHECK(flat.data()[j] == doctest::Approx(1.0 / 3).epsilon(1e-14));

  auto big = softmax_rows(Tensor::from(1, 2, {1000, 0}));
  CHECK(big.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big.data()[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(big.data()[0]));

  auto two = softmax_rows(Tensor::from(1, 2, {1, 2}));
  CHECK(two.data()[0] == doctest::Approx(0.26894).epsilon(1e-4));
  CHECK(two.data()[1] == doctest::Approx(0.73106).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to 1 across magnitudes") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double mag = rng.uniform(0.1, 1e3);
    auto x = random_tensor(6, 9, rng, false, mag);
    auto y = softmax_rows(x);
    for (int i = 0; i < y.rows(); ++i) {
      double sum = 0.0;
      for (int j = 0; j < y.cols(); ++j) {
        CHECK(y.at(i, j) >= 0.0);
        sum += y.at(i, j);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("elementwise and reduction ops") {
  auto r = relu(Tensor::from(1, 3, {-1, 0, 2}));
  CHECK(r.data()[0] == 0);
  CHECK(r.data()[1] == 0);
  CHECK(r.data()[2] == 2);

  auto m = mean(Tensor::from(1, 2, {2, 4}), 1);
  CHECK(m.item() == doctest::Approx(3).epsilon(1e-15));

  auto c = concat(Tensor::from(1, 1, {1}), Tensor::from(2, 1, {2, 3}), 0);
  CHECK(c.rows() == 3);
  CHECK(c.data()[0] == 1);
  CHECK(c.data()[1] == 2);
  CHECK(c.data()[2] == 3);

  auto e = elu(Tensor::from(1, 2, {-1, 2}));
  CHECK(e.data()[0] == doctest::Approx(std::expm1(-1.0)).epsilon(1e-15));
  CHECK(e.data()[1] == 2);
}

TEST_CASE("non-finite inputs are rejected at op boundaries") {
  CHECK_THROWS_AS((void)Tensor::from(1, 1, {std::nan("")}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)Tensor::from(1, 2, {1.0, INFINITY}),
                  std::invalid_argument);
}

TEST_CASE("max_pool_1d") {
  auto a = max_pool_1d(Tensor::from(4, 1, {1, 3, 2, 0}));
  CHECK(a.rows() == 2);
  CHECK(a.data()[0] == 3);
  CHECK(a.data()[1] == 2);

  auto single = max_pool_1d(Tensor::from(1, 2, {5, 6}));
  CHECK(single.rows() == 1);
  CHECK(single.data()[0] == 5);
  CHECK(single.data()[1] == 6);

  auto odd = max_pool_1d(Tensor::from(5, 1, {5, 1, 4, 4, 9}));
  CHECK(odd.rows() == 3);
  CHECK(odd.data()[0] == 5);
  CHECK(odd.data()[1] == 4);
  CHECK(odd.data()[2] == 9);
}

TEST_CASE("max_pool_1d length is ceil(L/2) for L in 1..64") {
  Rng rng(3);
  for (int L = 1; L <= 64; ++L) {
    auto x = random_tensor(L, 3, rng);
    CHECK(max_pool_1d(x).rows() == (L + 1) / 2);
  }
}

TEST_CASE("dropout semantics") {
  Rng rng(5);
  auto x = random_tensor(4, 4, rng);

  SUBCASE("rate 0 is identity") {
    Rng d(1);
    auto y = dropout(x, 0.0, d, true);
    for (int i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("eval mode is bitwise identity") {
    Rng d(1);
    auto y = dropout(x, 0.06, d, false);
    for (int i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("same seed gives same mask") {
    Rng d1(42), d2(42);
    auto y1 = dropout(x, 0.5, d1, true);
    auto y2 = dropout(x, 0.5, d2, true);
    for (int i = 0; i < x.size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
  }
  SUBCASE("invalid rate") {
    Rng d(1);
    CHECK_THROWS_AS((void)dropout(x, 1.0, d, true), std::invalid_argument);
  }
}

TEST_CASE("backward: sum of squares") {
  auto x = Tensor::from(1, 2, {1, 2}, true);
  auto loss = sum_all(mul(x, x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2).epsilon(1e-15));
  CHECK(x.grad()[1] == doctest::Approx(4).epsilon(1e-15));
}

TEST_CASE("backward: constant loss leaves grads at zero") {
  auto x = Tensor::from(1, 2, {1, 2}, true);
  x.zero_grad();
  auto loss = Tensor::scalar(3.0);
  backward(loss);
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[1] == 0);
}

TEST_CASE("backward rejects non-scalar loss") {
  auto x = Tensor::from(1, 2, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);
}

TEST_CASE("grad_check on simple functions") {
  SUBCASE("x*x at 3") {
    auto x = Tensor::from(1, 1, {3.0}, true);
    std::vector<Tensor> leaves{x};
    double err = grad_check([&] { return mul(x, x); }, leaves);
    CHECK(err < 1e-8);
  }
  SUBCASE("relu far from zero") {
    auto x = Tensor::from(1, 3, {5.0, -4.0, 2.5}, true);
    std::vector<Tensor> leaves{x};
    double err = grad_check([&] { return sum_all(relu(x)); }, leaves);
    CHECK(err < 1e-8);
  }
  SUBCASE("softmax cross on random 4x4") {
    Rng rng(19);
    auto x = random_tensor(4, 4, rng, true);
    auto w = random_tensor(4, 4, rng);
    std::vector<Tensor> leaves{x};
    double err = grad_check(
        [&] { return sum_all(mul(softmax_rows(x), w)); }, leaves);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("grad_check over every model op composition") {
  Rng rng(23);
  for (int seed = 0; seed < 10; ++seed) {
    auto x = random_tensor(5, 4, rng, true);
    auto w = random_tensor(4, 4, rng, true);
    auto g = random_tensor(1, 4, rng, true);
    auto b = random_tensor(1, 4, rng, true);
    std::vector<Tensor> leaves{x, w, g, b};
    double err = grad_check(
        [&] {
          auto h = matmul(x, w);
          h = layer_norm_rows(add(h, b), g, b);
          h = elu(h);
          h = concat(h, tanh_of(h), 1);
          h = slice_rows(h, 1, 5);
          h = max_pool_1d(h);
          h = mul(sigmoid(h), h);
          auto sm = softmax_rows(h);
          return sum_all(mul(sm, tanh_of(h)));
        },
        leaves);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gather/scatter gradients") {
  Rng rng(31);
  auto x = random_tensor(6, 3, rng, true);
  auto r = random_tensor(2, 3, rng, true);
  std::vector<Tensor> leaves{x, r};
  double err = grad_check(
      [&] {
        auto g = gather_rows(x, {4, 1});
        auto s = scatter_rows(x, add(g, r), {0, 5});
        return sum_all(mul(s, s));
      },
      leaves);
  CHECK(err < 1e-8);
}

TEST_CASE("grad accumulates across shared subexpressions") {
  auto x = Tensor::from(1, 1, {2.0}, true);
  auto y = mul(x, x);           // x^2
  auto loss = sum_all(add(y, y));  // 2x^2, d/dx = 4x = 8
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(8).epsilon(1e-15));
}
