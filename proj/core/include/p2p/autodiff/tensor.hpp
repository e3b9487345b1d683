#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace p2p::ad {

/// Dimension sizes, outermost first. Data is stored row-major, channels-last.
using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  // Empty until a gradient flows into the node.
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T{});
    return grad;
  }
};

/// Handle to a value in the differentiation graph.
///
/// Copies share the underlying node, so a parameter held by a layer and by
/// the model's parameter list is the same object. Results of operations keep
/// their inputs alive until the result itself is dropped; calling backward()
/// on a scalar result accumulates gradients into every reachable node that
/// requires them.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor leaf(Shape shape, std::vector<T> values, bool requires_grad);

  /// Builds an operation result. Throws NumericalError if any value is not
  /// finite. When no parent requires a gradient the result is a constant and
  /// the backward closure is discarded.
  static Tensor from_op(Shape shape, std::vector<T> values,
                        std::vector<Tensor> parents,
                        std::function<void(Node<T>&)> backward);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  [[nodiscard]] std::size_t size() const { return node_->value.size(); }

  [[nodiscard]] std::span<const T> data() const { return node_->value; }
  [[nodiscard]] std::span<T> mutable_data() { return node_->value; }
  [[nodiscard]] T item() const;

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
  [[nodiscard]] std::span<const T> grad() const { return node_->grad; }
  /// Drops the accumulated gradient; has_grad() is false afterwards.
  void clear_grad() { node_->grad.clear(); }

  /// Reverse-mode sweep from this scalar (size 1) tensor.
  void backward() const;

  /// Same values, no history.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] Node<T>& node() const { return *node_; }
  [[nodiscard]] const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<Node<T>> node_;
};

/// A trainable tensor with a unique dotted path, e.g. "block1.conv5x5.depthwise".
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace p2p::ad
