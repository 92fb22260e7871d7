#include "magcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "magcn/errors.hpp"

namespace magcn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

struct Dims {
  std::size_t rows;
  std::size_t cols;
};

Dims dims_of(const Shape& shape) {
  switch (shape.size()) {
    case 0:
      return {1, 1};
    case 1:
      return {1, shape[0]};
    case 2:
      return {shape[0], shape[1]};
    default:
      throw DimensionError("expected a matrix, got shape " + shape_str(shape));
  }
}

const NodePtr& checked(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor argument");
  return t.node();
}

// Builds an op result. History is only kept when some input needs a
// gradient and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                   std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  const bool needs = g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) {
                       return p->requires_grad;
                     });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  const auto& xn = checked(x, op);
  std::vector<double> out(xn->data.size());
  std::transform(xn->data.begin(), xn->data.end(), out.begin(), fwd);
  return make_result(xn->shape, std::move(out), op, {xn}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

// c[m x n] += a[m x k] * b[k x n], with optional transposes of the stored operands.
void gemm_acc(const double* a, bool ta, const double* b, bool tb, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      if (tb) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({}, {value}, requires_grad); }

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
  return Tensor({rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return checked(*this, "shape")->shape; }
std::size_t Tensor::numel() const { return checked(*this, "numel")->data.size(); }
std::size_t Tensor::rows() const { return dims_of(shape()).rows; }
std::size_t Tensor::cols() const { return dims_of(shape()).cols; }
std::span<const double> Tensor::data() const { return checked(*this, "data")->data; }
std::span<double> Tensor::mutable_data() { return checked(*this, "mutable_data")->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return data()[i]; }
double Tensor::at(std::size_t row, std::size_t col) const { return data()[row * cols() + col]; }

bool Tensor::requires_grad() const { return checked(*this, "requires_grad")->requires_grad; }
bool Tensor::has_grad() const { return defined() && node_->grad.size() == node_->data.size() && !node_->data.empty(); }
std::span<const double> Tensor::grad() const { return checked(*this, "grad")->grad; }

void Tensor::zero_grad() const {
  auto& n = *checked(*this, "zero_grad");
  n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach(bool requires_grad) const {
  return Tensor(shape(), std::vector<double>(data().begin(), data().end()), requires_grad);
}

// ---- tape / backward -------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  const auto& rn = checked(root, "Tape::record");
  if (!rn->requires_grad) return tape;
  std::unordered_set<const Node*> visited;
  // Iterative post-order DFS; producers land before consumers.
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(rn, 0);
  visited.insert(rn.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++];
      if (parent->requires_grad && visited.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      tape.order_.push_back(Tensor::from_node(node));
      stack.pop_back();
    }
  }
  return tape;
}

void backward(const Tensor& loss) {
  const auto& ln = checked(loss, "backward");
  if (ln->data.size() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_str(ln->shape));
  if (!ln->requires_grad) return;
  const Tape tape = Tape::record(loss);
  for (const Tensor& t : tape.order()) {
    Node& n = *t.node();
    if (!n.is_leaf()) n.grad.assign(n.data.size(), 0.0);
  }
  ln->grad_buffer()[0] += 1.0;
  const auto order = tape.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = *it->node();
    if (n.backward_fn) n.backward_fn(n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& an = checked(a, "matmul");
  const auto& bn = checked(b, "matmul");
  const Dims da = dims_of(an->shape);
  const Dims db = dims_of(bn->shape);
  if (da.cols != db.rows) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(an->shape) + " x " + shape_str(bn->shape));
  }
  const std::size_t m = da.rows, k = da.cols, n = db.cols;
  std::vector<double> out(m * n, 0.0);
  gemm_acc(an->data.data(), false, bn->data.data(), false, out.data(), m, k, n);
  return make_result({m, n}, std::move(out), "matmul", {an, bn}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) gemm_acc(self.grad.data(), false, pb.data.data(), true, pa.grad_buffer().data(), m, n, k);
    if (pb.requires_grad) gemm_acc(pa.data.data(), true, self.grad.data(), false, pb.grad_buffer().data(), k, m, n);
  });
}

Tensor transpose(const Tensor& a) {
  const auto& an = checked(a, "transpose");
  const Dims d = dims_of(an->shape);
  std::vector<double> out(an->data.size());
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j) out[j * d.rows + i] = an->data[i * d.cols + j];
  return make_result({d.cols, d.rows}, std::move(out), "transpose", {an}, [d](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) g[i * d.cols + j] += self.grad[j * d.rows + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& an = a.node();
  const auto& bn = b.node();
  std::vector<double> out(an->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->data[i] + bn->data[i];
  return make_result(an->shape, std::move(out), "add", {an, bn}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& an = a.node();
  const auto& bn = b.node();
  std::vector<double> out(an->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->data[i] - bn->data[i];
  return make_result(an->shape, std::move(out), "sub", {an, bn}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& an = a.node();
  const auto& bn = b.node();
  std::vector<double> out(an->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = an->data[i] * bn->data[i];
  return make_result(an->shape, std::move(out), "mul", {an, bn}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const auto& xn = checked(x, "add_bias");
  const auto& bn = checked(bias, "add_bias");
  const Dims d = dims_of(xn->shape);
  if (bn->data.size() != d.cols) {
    throw DimensionError("add_bias: bias " + shape_str(bn->shape) + " does not fit rows of " + shape_str(xn->shape));
  }
  std::vector<double> out(xn->data);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j) out[i * d.cols + j] += bn->data[j];
  return make_result(xn->shape, std::move(out), "add_bias", {xn, bn}, [d](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) g[j] += self.grad[i * d.cols + j];
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax_rows(const Tensor& x) {
  const auto& xn = checked(x, "softmax_rows");
  const Dims d = dims_of(xn->shape);
  for (double v : xn->data) {
    if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite logit");
  }
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < d.rows; ++i) {
    const double* row = xn->data.data() + i * d.cols;
    double* y = out.data() + i * d.cols;
    const double mx = *std::max_element(row, row + d.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < d.cols; ++j) total += (y[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < d.cols; ++j) y[j] /= total;
  }
  return make_result(xn->shape, std::move(out), "softmax_rows", {xn}, [d](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < d.rows; ++i) {
      const double* y = self.data.data() + i * d.cols;
      const double* gy = self.grad.data() + i * d.cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < d.cols; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < d.cols; ++j) g[i * d.cols + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor l2norm_rows(const Tensor& x) {
  const auto& xn = checked(x, "l2norm_rows");
  const Dims d = dims_of(xn->shape);
  std::vector<double> norms(d.rows);
  std::vector<double> out(xn->data.size());
  for (std::size_t i = 0; i < d.rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d.cols; ++j) sq += xn->data[i * d.cols + j] * xn->data[i * d.cols + j];
    norms[i] = std::sqrt(sq);
    const double denom = std::max(norms[i], kL2NormEpsilon);
    for (std::size_t j = 0; j < d.cols; ++j) out[i * d.cols + j] = xn->data[i * d.cols + j] / denom;
  }
  return make_result(xn->shape, std::move(out), "l2norm_rows", {xn}, [d, norms = std::move(norms)](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < d.rows; ++i) {
      const double* y = self.data.data() + i * d.cols;
      const double* gy = self.grad.data() + i * d.cols;
      if (norms[i] > kL2NormEpsilon) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d.cols; ++j) dot += y[j] * gy[j];
        for (std::size_t j = 0; j < d.cols; ++j) g[i * d.cols + j] += (gy[j] - y[j] * dot) / norms[i];
      } else {
        for (std::size_t j = 0; j < d.cols; ++j) g[i * d.cols + j] += gy[j] / kL2NormEpsilon;
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto& xn = checked(x, "sum");
  const double total = std::accumulate(xn->data.begin(), xn->data.end(), 0.0);
  return make_result({}, {total}, "sum", {xn}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (double& g : p.grad_buffer()) g += self.grad[0];
  });
}

Tensor mean_rows(const Tensor& x) {
  const auto& xn = checked(x, "mean_rows");
  const Dims d = dims_of(xn->shape);
  if (d.rows == 0) throw DimensionError("mean_rows: no rows");
  std::vector<double> out(d.cols, 0.0);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j) out[j] += xn->data[i * d.cols + j];
  for (double& v : out) v /= static_cast<double>(d.rows);
  return make_result({1, d.cols}, std::move(out), "mean_rows", {xn}, [d](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    const double inv = 1.0 / static_cast<double>(d.rows);
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < d.cols; ++j) g[i * d.cols + j] += self.grad[j] * inv;
  });
}

Tensor frobenius_sq(const Tensor& x) {
  const auto& xn = checked(x, "frobenius_sq");
  double total = 0.0;
  for (double v : xn->data) total += v * v;
  return make_result({}, {total}, "frobenius_sq", {xn}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * p.data[i] * self.grad[0];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::vector<NodePtr> parents;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    const auto& n = checked(t, "concat_cols");
    const Dims d = dims_of(n->shape);
    if (d.rows != rows) {
      throw DimensionError("concat_cols: row counts differ, " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(n->shape));
    }
    parents.push_back(n);
    widths.push_back(d.cols);
    total += d.cols;
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(parents[k]->data.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  return make_result({rows, total}, std::move(out), "concat_cols", std::move(parents),
                     [rows, total, widths = std::move(widths)](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         Node& p = *self.parents[k];
                         if (p.requires_grad) {
                           auto& g = p.grad_buffer();
                           for (std::size_t i = 0; i < rows; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::vector<NodePtr> parents;
  std::vector<double> out;
  std::size_t rows = 0;
  for (const Tensor& t : parts) {
    const auto& n = checked(t, "concat_rows");
    const Dims d = dims_of(n->shape);
    if (d.cols != cols) {
      throw DimensionError("concat_rows: column counts differ, " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(n->shape));
    }
    out.insert(out.end(), n->data.begin(), n->data.end());
    rows += d.rows;
    parents.push_back(n);
  }
  return make_result({rows, cols}, std::move(out), "concat_rows", std::move(parents), [](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
      }
      off += p->data.size();
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto& xn = checked(x, "slice_cols");
  const Dims d = dims_of(xn->shape);
  if (begin + count > d.cols) throw DimensionError("slice_cols: range exceeds " + shape_str(xn->shape));
  std::vector<double> out(d.rows * count);
  for (std::size_t i = 0; i < d.rows; ++i)
    std::copy_n(xn->data.data() + i * d.cols + begin, count, out.data() + i * count);
  return make_result({d.rows, count}, std::move(out), "slice_cols", {xn}, [d, begin, count](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < d.rows; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * d.cols + begin + j] += self.grad[i * count + j];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto& xn = checked(x, "slice_rows");
  const Dims d = dims_of(xn->shape);
  if (begin + count > d.rows) throw DimensionError("slice_rows: range exceeds " + shape_str(xn->shape));
  std::vector<double> out(xn->data.begin() + static_cast<std::ptrdiff_t>(begin * d.cols),
                          xn->data.begin() + static_cast<std::ptrdiff_t>((begin + count) * d.cols));
  return make_result({count, d.cols}, std::move(out), "slice_rows", {xn}, [d, begin](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d.cols + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  const auto& tn = checked(table, "gather_rows");
  const Dims d = dims_of(tn->shape);
  std::vector<double> out(indices.size() * d.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= d.rows) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " outside table " +
                           shape_str(tn->shape));
    }
    std::copy_n(tn->data.data() + indices[i] * d.cols, d.cols, out.data() + i * d.cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  return make_result({n, d.cols}, std::move(out), "gather_rows", {tn},
                     [d, idx = std::move(idx)](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < d.cols; ++j) g[idx[i] * d.cols + j] += self.grad[i * d.cols + j];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  const auto& xn = checked(x, "reshape");
  if (shape_numel(shape) != xn->data.size()) {
    throw DimensionError("reshape: " + shape_str(xn->shape) + " to " + shape_str(shape));
  }
  return make_result(std::move(shape), xn->data, "reshape", {xn}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor elementwise(ElementwiseOp op, std::span<const Tensor> args) {
  auto arity = [&](std::size_t n) {
    if (args.size() != n) throw ContractError("elementwise: wrong argument count");
  };
  switch (op) {
    case ElementwiseOp::kAdd:
      arity(2);
      return add(args[0], args[1]);
    case ElementwiseOp::kMul:
      arity(2);
      return mul(args[0], args[1]);
    case ElementwiseOp::kRelu:
      arity(1);
      return relu(args[0]);
    case ElementwiseOp::kTanh:
      arity(1);
      return tanh(args[0]);
    case ElementwiseOp::kSigmoid:
      arity(1);
      return sigmoid(args[0]);
    case ElementwiseOp::kConcatCols:
      return concat_cols(args);
    case ElementwiseOp::kMeanRows:
      arity(1);
      return mean_rows(args[0]);
    case ElementwiseOp::kL2NormRows:
      arity(1);
      return l2norm_rows(args[0]);
    case ElementwiseOp::kFrobeniusSq:
      arity(1);
      return frobenius_sq(args[0]);
  }
  throw ContractError("elementwise: unknown op");
}

}  // namespace magcn
