#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddosnet::ndgrad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Thrown when operand shapes do not agree with an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the autograd tape. `backward` receives the node's own
// accumulated gradient and pushes contributions into the parents it captured.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(const std::vector<double>&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major n-d array of doubles with optional reverse-mode gradient.
///
/// A Tensor is a shared handle: copies alias the same buffer. Ops never
/// mutate their inputs; only parameter updates (optimizers, grad checks,
/// checkpoint loading) write through `mutable_data()`.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse-mode sweep from a single-element tensor.
  void backward() const;

  /// Leaf copy of the values, cut from the tape.
  Tensor detach() const;

  /// Builds an op result. Parents and the backward closure are only kept
  /// when at least one parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> data,
                            const std::vector<Tensor>& parents,
                            std::function<void(const std::vector<double>&)> backward);

  const detail::NodePtr& node_ptr() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::Node& node() const;

  detail::NodePtr node_;
};

}  // namespace ddosnet::ndgrad
