#include "optlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace optlab {

namespace {

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(op) +
                                  ": non-finite value in tensor");
    }
  }
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(op) + ": undefined tensor");
  }
  check_finite(t.data(), op);
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                              std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " vs " +
                              std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
}

}  // namespace

void TensorNode::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor make_op(int rows, int cols, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backprop) {
  auto node = std::make_shared<TensorNode>();
  node->rows = rows;
  node->cols = cols;
  node->data = std::move(data);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  node->requires_grad = needs;
  if (needs) {
    for (const auto& p : parents) node->parents.push_back(p.node_);
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

// -------- construction --------

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(std::size_t(rows) * cols, 0.0),
              requires_grad);
}

Tensor Tensor::full(int rows, int cols, double value) {
  return from(rows, cols, std::vector<double>(std::size_t(rows) * cols, value));
}

Tensor Tensor::from(int rows, int cols, std::vector<double> data,
                    bool requires_grad) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("Tensor::from: dimensions must be positive");
  }
  if (data.size() != std::size_t(rows) * cols) {
    throw std::invalid_argument("Tensor::from: data length does not match shape");
  }
  check_finite(data, "Tensor::from");
  auto node = std::make_shared<TensorNode>();
  node->rows = rows;
  node->cols = cols;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from(1, 1, {value}); }

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
  int n = static_cast<int>(data.size());
  return from(1, n, std::move(data), requires_grad);
}

Tensor Tensor::column(std::vector<double> data, bool requires_grad) {
  int n = static_cast<int>(data.size());
  return from(n, 1, std::move(data), requires_grad);
}

// -------- accessors --------

int Tensor::rows() const { return node_ ? node_->rows : 0; }
int Tensor::cols() const { return node_ ? node_->cols : 0; }
int Tensor::size() const { return node_ ? static_cast<int>(node_->data.size()) : 0; }

std::span<const double> Tensor::data() const {
  if (!node_) return {};
  return node_->data;
}

double Tensor::at(int r, int c) const {
  if (!node_ || r < 0 || r >= rows() || c < 0 || c >= cols()) {
    throw std::out_of_range("Tensor::at: index out of range");
  }
  return node_->data[std::size_t(r) * cols() + c];
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw std::invalid_argument("Tensor::item: tensor is not scalar");
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  const_cast<TensorNode*>(node_.get())->ensure_grad();
  return node_->grad;
}

double Tensor::grad_at(int r, int c) const {
  auto g = grad();
  return g[std::size_t(r) * cols() + c];
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::apply_update(std::span<const double> new_data) {
  if (!node_) throw std::invalid_argument("apply_update: undefined tensor");
  if (new_data.size() != node_->data.size()) {
    throw std::invalid_argument("apply_update: size mismatch");
  }
  check_finite(new_data, "apply_update");
  std::copy(new_data.begin(), new_data.end(), node_->data.begin());
}

Tensor Tensor::detached_copy() const {
  if (!node_) return {};
  return from(rows(), cols(), node_->data);
}

// -------- ops --------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(std::size_t(m) * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = pa[std::size_t(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = pb + std::size_t(p) * n;
      double* orow = out.data() + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return make_op(m, n, std::move(out), {a, b}, [na, nb, m, k, n](TensorNode& self) {
    // dA = dC B^T, dB = A^T dC
    if (na->requires_grad) {
      na->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j)
            acc += self.grad[std::size_t(i) * n + j] * nb->data[std::size_t(p) * n + j];
          na->grad[std::size_t(i) * k + p] += acc;
        }
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int p = 0; p < k; ++p)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int i = 0; i < m; ++i)
            acc += na->data[std::size_t(i) * k + p] * self.grad[std::size_t(i) * n + j];
          nb->grad[std::size_t(p) * n + j] += acc;
        }
    }
  });
}

Tensor transpose(const Tensor& x) {
  check_defined(x, "transpose");
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(std::size_t(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[std::size_t(j) * m + i] = x.data()[std::size_t(i) * n + j];
  TensorNode* nx = x.node();
  return make_op(n, m, std::move(out), {x}, [nx, m, n](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        nx->grad[std::size_t(i) * n + j] += self.grad[std::size_t(j) * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_defined(a, "add");
  check_defined(b, "add");
  const int m = a.rows(), n = a.cols();
  const bool rowwise = (b.rows() == 1 && b.cols() == n && m != 1);
  if (!rowwise && (b.rows() != m || b.cols() != n)) shape_error("add", a, b);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[std::size_t(i) * n + j] += b.data()[rowwise ? j : std::size_t(i) * n + j];
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return make_op(m, n, std::move(out), {a, b},
                 [na, nb, m, n, rowwise](TensorNode& self) {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) na->grad[i] += self.grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      if (rowwise) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) nb->grad[j] += self.grad[std::size_t(i) * n + j];
      } else {
        for (std::size_t i = 0; i < self.grad.size(); ++i) nb->grad[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  std::vector<double> out(a.size());
  for (int i = 0; i < a.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  return make_op(a.rows(), a.cols(), std::move(out), {a, b},
                 [na, nb](TensorNode& self) {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        na->grad[i] += self.grad[i] * nb->data[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        nb->grad[i] += self.grad[i] * na->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double c) {
  check_defined(x, "scale");
  if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite factor");
  std::vector<double> out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = x.data()[i] * c;
  TensorNode* nx = x.node();
  return make_op(x.rows(), x.cols(), std::move(out), {x}, [nx, c](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx->grad[i] += c * self.grad[i];
  });
}

namespace {

Tensor unary_op(const Tensor& x, const char* name,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx_of_xy) {
  check_defined(x, name);
  std::vector<double> out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = f(x.data()[i]);
  TensorNode* nx = x.node();
  return make_op(x.rows(), x.cols(), std::move(out), {x},
                 [nx, dfdx_of_xy](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      nx->grad[i] += self.grad[i] * dfdx_of_xy(nx->data[i], self.data[i]);
  });
}

}  // namespace

Tensor relu(const Tensor& x) {
  // gradient at exactly 0 is 0
  return unary_op(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x) {
  return unary_op(
      x, "elu", [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid",
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_of(const Tensor& x) {
  return unary_op(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax_rows(const Tensor& x) {
  check_defined(x, "softmax_rows");
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(x.size());
  for (int i = 0; i < m; ++i) {
    const double* xi = x.data().data() + std::size_t(i) * n;
    double* yi = out.data() + std::size_t(i) * n;
    double mx = xi[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      sum += yi[j];
    }
    for (int j = 0; j < n; ++j) yi[j] /= sum;
  }
  TensorNode* nx = x.node();
  return make_op(m, n, std::move(out), {x}, [nx, m, n](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* y = self.data.data() + std::size_t(i) * n;
      const double* dy = self.grad.data() + std::size_t(i) * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += y[j] * dy[j];
      double* dx = nx->grad.data() + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  check_defined(x, "layer_norm_rows");
  check_defined(gain, "layer_norm_rows");
  check_defined(bias, "layer_norm_rows");
  const int m = x.rows(), n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n) shape_error("layer_norm_rows", x, gain);
  if (bias.rows() != 1 || bias.cols() != n) shape_error("layer_norm_rows", x, bias);
  constexpr double kEps = 1e-6;
  std::vector<double> out(x.size());
  std::vector<double> norm(x.size());   // (x - mu) / s, kept for backprop
  std::vector<double> inv_s(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    const double* xi = x.data().data() + std::size_t(i) * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += xi[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= n;
    const double s = 1.0 / std::sqrt(var + kEps);
    inv_s[std::size_t(i)] = s;
    for (int j = 0; j < n; ++j) {
      const double h = (xi[j] - mu) * s;
      norm[std::size_t(i) * n + j] = h;
      out[std::size_t(i) * n + j] = gain.data()[j] * h + bias.data()[j];
    }
  }
  TensorNode* nx = x.node();
  TensorNode* ng = gain.node();
  TensorNode* nb = bias.node();
  return make_op(m, n, std::move(out), {x, gain, bias},
                 [nx, ng, nb, m, n, norm = std::move(norm),
                  inv_s = std::move(inv_s)](TensorNode& self) {
    for (int i = 0; i < m; ++i) {
      const double* h = norm.data() + std::size_t(i) * n;
      const double* dout = self.grad.data() + std::size_t(i) * n;
      if (ng->requires_grad) {
        ng->ensure_grad();
        for (int j = 0; j < n; ++j) ng->grad[j] += dout[j] * h[j];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (int j = 0; j < n; ++j) nb->grad[j] += dout[j];
      }
      if (nx->requires_grad) {
        nx->ensure_grad();
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dh = dout[j] * ng->data[j];
          mean_dh += dh;
          mean_dh_h += dh * h[j];
        }
        mean_dh /= n;
        mean_dh_h /= n;
        double* dx = nx->grad.data() + std::size_t(i) * n;
        const double s = inv_s[std::size_t(i)];
        for (int j = 0; j < n; ++j) {
          const double dh = dout[j] * ng->data[j];
          dx[j] += s * (dh - mean_dh - h[j] * mean_dh_h);
        }
      }
    }
  });
}

Tensor mean(const Tensor& x, int axis) {
  check_defined(x, "mean");
  if (axis != 0 && axis != 1) throw std::invalid_argument("mean: axis must be 0 or 1");
  const int m = x.rows(), n = x.cols();
  TensorNode* nx = x.node();
  if (axis == 0) {
    std::vector<double> out(std::size_t(n), 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out[j] += x.data()[std::size_t(i) * n + j];
    for (int j = 0; j < n; ++j) out[j] /= m;
    return make_op(1, n, std::move(out), {x}, [nx, m, n](TensorNode& self) {
      if (!nx->requires_grad) return;
      nx->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          nx->grad[std::size_t(i) * n + j] += self.grad[j] / m;
    });
  }
  std::vector<double> out(std::size_t(m), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out[i] += x.data()[std::size_t(i) * n + j];
    out[i] /= n;
  }
  return make_op(m, 1, std::move(out), {x}, [nx, m, n](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        nx->grad[std::size_t(i) * n + j] += self.grad[i] / n;
  });
}

Tensor sum_all(const Tensor& x) {
  check_defined(x, "sum_all");
  double total = 0.0;
  for (double v : x.data()) total += v;
  TensorNode* nx = x.node();
  return make_op(1, 1, {total}, {x}, [nx](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (double& g : nx->grad) g += self.grad[0];
  });
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  check_defined(a, "concat");
  check_defined(b, "concat");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  TensorNode* na = a.node();
  TensorNode* nb = b.node();
  if (axis == 0) {
    if (a.cols() != b.cols()) shape_error("concat", a, b);
    const int n = a.cols();
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    const int ma = a.rows();
    return make_op(a.rows() + b.rows(), n, std::move(out), {a, b},
                   [na, nb, ma, n](TensorNode& self) {
      if (na->requires_grad) {
        na->ensure_grad();
        for (std::size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += self.grad[i];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        const std::size_t off = std::size_t(ma) * n;
        for (std::size_t i = 0; i < nb->grad.size(); ++i)
          nb->grad[i] += self.grad[off + i];
      }
    });
  }
  if (a.rows() != b.rows()) shape_error("concat", a, b);
  const int m = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(std::size_t(m) * (ca + cb));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < ca; ++j)
      out[std::size_t(i) * (ca + cb) + j] = a.data()[std::size_t(i) * ca + j];
    for (int j = 0; j < cb; ++j)
      out[std::size_t(i) * (ca + cb) + ca + j] = b.data()[std::size_t(i) * cb + j];
  }
  return make_op(m, ca + cb, std::move(out), {a, b},
                 [na, nb, m, ca, cb](TensorNode& self) {
    for (int i = 0; i < m; ++i) {
      if (na->requires_grad) {
        na->ensure_grad();
        for (int j = 0; j < ca; ++j)
          na->grad[std::size_t(i) * ca + j] += self.grad[std::size_t(i) * (ca + cb) + j];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (int j = 0; j < cb; ++j)
          nb->grad[std::size_t(i) * cb + j] +=
              self.grad[std::size_t(i) * (ca + cb) + ca + j];
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, int begin, int end) {
  check_defined(x, "slice_rows");
  if (begin < 0 || end > x.rows() || begin >= end) {
    throw std::invalid_argument("slice_rows: invalid range");
  }
  const int n = x.cols();
  std::vector<double> out(x.data().begin() + std::size_t(begin) * n,
                          x.data().begin() + std::size_t(end) * n);
  TensorNode* nx = x.node();
  return make_op(end - begin, n, std::move(out), {x},
                 [nx, begin, n](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    const std::size_t off = std::size_t(begin) * n;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      nx->grad[off + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::vector<int> indices) {
  check_defined(x, "gather_rows");
  if (indices.empty()) throw std::invalid_argument("gather_rows: empty index list");
  const int n = x.cols();
  std::vector<double> out(indices.size() * std::size_t(n));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= x.rows())
      throw std::invalid_argument("gather_rows: index out of range");
    std::copy_n(x.data().begin() + std::size_t(i) * n, n,
                out.begin() + r * std::size_t(n));
  }
  TensorNode* nx = x.node();
  const int out_rows = static_cast<int>(indices.size());
  return make_op(out_rows, n, std::move(out), {x},
                 [nx, n, idx = std::move(indices)](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (int j = 0; j < n; ++j)
        nx->grad[std::size_t(idx[r]) * n + j] += self.grad[r * std::size_t(n) + j];
  });
}

Tensor scatter_rows(const Tensor& base, const Tensor& rows,
                    std::vector<int> indices) {
  check_defined(base, "scatter_rows");
  check_defined(rows, "scatter_rows");
  if (rows.cols() != base.cols() ||
      rows.rows() != static_cast<int>(indices.size())) {
    shape_error("scatter_rows", base, rows);
  }
  const int n = base.cols();
  std::vector<double> out(base.data().begin(), base.data().end());
  std::vector<bool> replaced(std::size_t(base.rows()), false);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= base.rows())
      throw std::invalid_argument("scatter_rows: index out of range");
    if (replaced[std::size_t(i)])
      throw std::invalid_argument("scatter_rows: duplicate index");
    replaced[std::size_t(i)] = true;
    std::copy_n(rows.data().begin() + r * std::size_t(n), n,
                out.begin() + std::size_t(i) * n);
  }
  TensorNode* nb = base.node();
  TensorNode* nr = rows.node();
  return make_op(base.rows(), n, std::move(out), {base, rows},
                 [nb, nr, n, idx = std::move(indices),
                  replaced = std::move(replaced)](TensorNode& self) {
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (int i = 0; i < nb->rows; ++i) {
        if (replaced[std::size_t(i)]) continue;
        for (int j = 0; j < n; ++j)
          nb->grad[std::size_t(i) * n + j] += self.grad[std::size_t(i) * n + j];
      }
    }
    if (nr->requires_grad) {
      nr->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < n; ++j)
          nr->grad[r * std::size_t(n) + j] +=
              self.grad[std::size_t(idx[r]) * n + j];
    }
  });
}

Tensor max_pool_1d(const Tensor& x, int stride) {
  check_defined(x, "max_pool_1d");
  if (stride != 2) throw std::invalid_argument("max_pool_1d: only stride 2 supported");
  const int m = x.rows(), n = x.cols();
  if (m < 1) throw std::invalid_argument("max_pool_1d: empty sequence");
  const int out_m = (m + 1) / 2;
  std::vector<double> out(std::size_t(out_m) * n);
  std::vector<int> argmax(out.size());  // source row of each pooled element
  for (int w = 0; w < out_m; ++w) {
    const int r0 = 2 * w;
    const int r1 = std::min(r0 + 1, m - 1);
    for (int j = 0; j < n; ++j) {
      const double v0 = x.data()[std::size_t(r0) * n + j];
      const double v1 = x.data()[std::size_t(r1) * n + j];
      const int src = (r1 != r0 && v1 > v0) ? r1 : r0;
      out[std::size_t(w) * n + j] = std::max(v0, v1);
      argmax[std::size_t(w) * n + j] = src;
    }
  }
  TensorNode* nx = x.node();
  return make_op(out_m, n, std::move(out), {x},
                 [nx, n, argmax = std::move(argmax)](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (std::size_t e = 0; e < self.grad.size(); ++e) {
      const int j = static_cast<int>(e % std::size_t(n));
      nx->grad[std::size_t(argmax[e]) * n + j] += self.grad[e];
    }
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  check_defined(x, "dropout");
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  }
  if (!training || rate == 0.0) {
    // bitwise identity in eval mode
    TensorNode* nx = x.node();
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_op(x.rows(), x.cols(), std::move(out), {x}, [nx](TensorNode& self) {
      if (!nx->requires_grad) return;
      nx->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) nx->grad[i] += self.grad[i];
    });
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (int i = 0; i < x.size(); ++i)
    mask[i] = (rng.uniform() < rate) ? 0.0 : keep_scale;
  std::vector<double> out(x.size());
  for (int i = 0; i < x.size(); ++i) out[i] = x.data()[i] * mask[i];
  TensorNode* nx = x.node();
  return make_op(x.rows(), x.cols(), std::move(out), {x},
                 [nx, mask = std::move(mask)](TensorNode& self) {
    if (!nx->requires_grad) return;
    nx->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      nx->grad[i] += self.grad[i] * mask[i];
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a defined scalar");
  }
  TensorNode* root = loss.node();
  if (!root->requires_grad) return;  // constant loss, nothing to propagate

  // iterative post-order topo sort over the parent DAG
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
  // release the graph; leaves keep their grads
  for (TensorNode* node : order) {
    if (node->backprop) {
      node->backprop = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                  double eps, int max_coords_per_leaf,
                  std::uint64_t subsample_seed) {
  for (auto& leaf : leaves) leaf.zero_grad();
  Tensor loss = f();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) {
    analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  }

  Rng pick(subsample_seed);
  double max_err = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    std::vector<double> base(leaf.data().begin(), leaf.data().end());
    std::vector<int> coords;
    const int total = leaf.size();
    if (max_coords_per_leaf <= 0 || max_coords_per_leaf >= total) {
      coords.resize(std::size_t(total));
      for (int i = 0; i < total; ++i) coords[std::size_t(i)] = i;
    } else {
      std::unordered_set<int> seen;
      while (static_cast<int>(seen.size()) < max_coords_per_leaf)
        seen.insert(static_cast<int>(pick.index(std::size_t(total))));
      coords.assign(seen.begin(), seen.end());
      std::sort(coords.begin(), coords.end());
    }
    for (int c : coords) {
      std::vector<double> probe = base;
      probe[std::size_t(c)] = base[std::size_t(c)] + eps;
      leaf.apply_update(probe);
      const double up = f().item();
      probe[std::size_t(c)] = base[std::size_t(c)] - eps;
      leaf.apply_update(probe);
      const double down = f().item();
      leaf.apply_update(base);
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[li][std::size_t(c)];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace optlab
