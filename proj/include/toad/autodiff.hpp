#pragma once

// Dense float64 tensors with tape-free reverse-mode differentiation.
//
// Every op result keeps shared references to its inputs plus a backward
// closure, so the computation graph is the DAG reachable from the loss.
// Leaves (tensors created directly with requires_grad) accumulate gradients
// across backward calls until zero_grad(); intermediate gradients are reset
// at the start of every backward pass.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace toad::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first backward
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access; intended for leaves (optimizers, initializers).
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  // Deep copy of the values as a new leaf with the same requires_grad flag.
  Tensor clone() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread while alive.
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

// ---- primitives ----------------------------------------------------------

// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Adds vector b ([n]) to every row of matrix m ([r,n]).
Tensor add_rowwise(const Tensor& m, const Tensor& b);
// Rank-1 or rank-2 inputs; all other extents must agree.
Tensor concat(std::span<const Tensor> parts, std::size_t axis = 0);
// Equal-length vectors -> [count, length] matrix.
Tensor stack_rows(std::span<const Tensor> rows);
// Contiguous slice of a vector.
Tensor slice(const Tensor& v, std::size_t start, std::size_t length);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
// Softmax along the last axis. Masked-out positions (false) are exactly 0.
Tensor softmax(const Tensor& a, const std::vector<bool>* mask = nullptr);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor squared_difference(const Tensor& a, const Tensor& b);

// ---- losses --------------------------------------------------------------

// -log softmax(logits)[gold]; logits is a vector.
Tensor cross_entropy(const Tensor& logits, std::size_t gold);
// Mean of (a-b)^2 over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

// Identity forward; backward multiplies the upstream gradient by -rho.
Tensor grad_reverse(const Tensor& x, double rho);

// ---- graph ---------------------------------------------------------------

// Reverse topological order over the requires_grad subgraph reachable
// from a root; each node appears once.
class Graph {
 public:
  explicit Graph(const Tensor& root);
  const std::vector<detail::Node*>& reverse_order() const { return order_; }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<detail::Node*> order_;
};

// Populates/accumulates gradients of all reachable leaves. loss must be a
// single-element tensor.
void backward(const Tensor& loss);

}  // namespace toad::ad
