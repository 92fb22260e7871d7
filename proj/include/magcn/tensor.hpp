#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace magcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first backward reaches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major double tensor with value semantics on the handle and
/// shared ownership of the underlying buffer.
///
/// Copies of a Tensor alias the same node; operations build new nodes and
/// link them to their inputs when any input requires a gradient. The graph
/// is released together with the last handle that references it, so each
/// training step starts from a fresh tape.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Rank-1 tensors read as a single row, scalars as 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad() const;

  /// Detached copy: same values, fresh leaf without history.
  Tensor detach(bool requires_grad = false) const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered record of the operations that produced a tensor.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::span<const Tensor> order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<Tensor> order_;
};

/// Populates grad on every requires_grad ancestor of a scalar loss.
/// Leaf gradients accumulate across calls; intermediate gradients are
/// recomputed each call.
void backward(const Tensor& loss);

/// While alive, new operations on this thread record no history.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- primitive operations -------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
/// x[n x d] + b[d] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
inline constexpr double kL2NormEpsilon = 1e-12;
/// Each row v maps to v / max(|v|_2, kL2NormEpsilon).
Tensor l2norm_rows(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean_rows(const Tensor& x);
Tensor frobenius_sq(const Tensor& x);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
/// Row i of the result is table row indices[i].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& x, Shape shape);

enum class ElementwiseOp {
  kAdd,
  kMul,
  kRelu,
  kTanh,
  kSigmoid,
  kConcatCols,
  kMeanRows,
  kL2NormRows,
  kFrobeniusSq,
};

/// Uniform entry point over the element-level primitives above.
Tensor elementwise(ElementwiseOp op, std::span<const Tensor> args);

}  // namespace magcn
