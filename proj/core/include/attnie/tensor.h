#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace attnie {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the computation graph. Leaves have no inputs and no
// backward rule; parameters are leaves with requires_grad set.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major float64 tensor. Copies are shallow handles onto the same
// graph node, so a parameter Tensor held by a model and the one used in a
// forward pass share value and gradient storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;  // zeros when no gradient arrived
  std::span<double> mutable_grad();
  void zero_grad();

  // New leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;
  // Deep copy including requires_grad, cut from the graph.
  Tensor clone() const;

  const char* op_name() const;
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Operations reachable from a loss, in topological order (inputs before the
// operations that consume them). Replaying it backwards visits every
// recorded operation exactly once.
class ComputationTape {
 public:
  static ComputationTape record(const Tensor& loss);

  std::span<detail::Node* const> operations() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every backward rule in reverse order.
  void replay_backward(const Tensor& loss) const;

 private:
  std::vector<detail::Node*> order_;
};

// Builds an operation result. The result requires grad when any input does;
// only then are the inputs linked and `rule` installed. Rules must skip
// inputs whose requires_grad is false.
Tensor make_op_result(const char* op, Shape shape, std::vector<double> value,
                      std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> rule);

// Accumulates gradients of a scalar loss into every requires_grad leaf.
// Throws ContractError when the loss is not a scalar.
void backward(const Tensor& loss);

}  // namespace attnie
