#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "optlab/rng.hpp"

namespace optlab {

struct TensorNode;

// Dense row-major 2-D tensor of 64-bit floats with reverse-mode gradients.
// Values are immutable after construction except the grad slot (and
// apply_update on optimizer-owned leaves). The operation graph is built
// eagerly per forward pass and released by backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value);
  static Tensor from(int rows, int cols, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> data, bool requires_grad = false);
  static Tensor column(std::vector<double> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  int rows() const;
  int cols() const;
  int size() const;

  std::span<const double> data() const;
  double at(int r, int c) const;
  double item() const;  // requires 1x1

  bool requires_grad() const;
  std::span<const double> grad() const;
  double grad_at(int r, int c) const;
  void zero_grad();

  // In-place data replacement for leaf parameters (optimizer updates).
  void apply_update(std::span<const double> new_data);
  // Detached copy of the current values (no graph, no grad).
  Tensor detached_copy() const;

  TensorNode* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op(int rows, int cols, std::vector<double> data,
                        std::vector<Tensor> parents,
                        std::function<void(TensorNode&)> backprop);
};

struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  void ensure_grad();
};

// ---- operations (all validate shapes and reject non-finite inputs) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
// add accepts equal shapes, or a row bias b of shape 1 x n against m x n.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, equal shapes
Tensor scale(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);  // alpha = 1
Tensor sigmoid(const Tensor& x);
Tensor tanh_of(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
// Per-row normalization followed by elementwise gain/bias (both 1 x n).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor mean(const Tensor& x, int axis);  // axis 0 -> 1 x n, axis 1 -> m x 1
Tensor sum_all(const Tensor& x);         // 1 x 1
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor slice_rows(const Tensor& x, int begin, int end);
Tensor gather_rows(const Tensor& x, std::vector<int> indices);
// Copy of base with the given rows replaced by `rows` (one per index).
Tensor scatter_rows(const Tensor& base, const Tensor& rows,
                    std::vector<int> indices);
Tensor max_pool_1d(const Tensor& x, int stride = 2);
// Inverted dropout: scales survivors by 1/(1-rate) in training mode,
// identity in eval mode. rate in [0, 1).
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// Reverse-mode sweep from a scalar loss; fills grad on every
// requires_grad leaf reachable from it, then frees the graph.
void backward(const Tensor& loss);

// Central-difference gradient checker. Runs f once for analytic gradients,
// then perturbs leaf coordinates by +/-eps. Returns the max over checked
// coordinates of |analytic - numeric| / max(1, |analytic|).
// max_coords_per_leaf == 0 checks every coordinate; otherwise a seeded
// random subset per leaf.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                  double eps = 1e-5, int max_coords_per_leaf = 0,
                  std::uint64_t subsample_seed = 0);

}  // namespace optlab
