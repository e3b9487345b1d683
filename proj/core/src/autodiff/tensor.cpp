#include "p2p/autodiff/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "p2p/error.hpp"

namespace p2p::ad {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
void check_shape(const Shape& shape, std::size_t n) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + to_string(shape));
  }
  if (element_count(shape) != n) {
    throw DimensionError("shape " + to_string(shape) + " does not match " +
                         std::to_string(n) + " values");
  }
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  return leaf(std::move(shape), std::move(values), false);
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = element_count(shape);
  return leaf(std::move(shape), std::vector<T>(n, T{}), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape<T>(shape, values.size());
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> values,
                             std::vector<Tensor> parents,
                             std::function<void(Node<T>&)> backward) {
  check_shape<T>(shape, values.size());
  // v * 0 is NaN exactly when v is NaN or infinite; the sum vectorizes.
  T probe{};
  const T* pv = values.data();
  const std::size_t n = values.size();
#pragma omp simd reduction(+ : probe)
  for (std::size_t i = 0; i < n; ++i) probe += pv[i] * T{0};
  if (probe != T{0}) {
    throw NumericalError("non-finite value produced in forward pass (shape " + to_string(shape) + ")");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  for (const auto& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw DimensionError("item() needs a single-element tensor, got " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::backward() const {
  if (size() != 1) {
    throw DimensionError("backward() needs a scalar root, got " + to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return constant(shape(), node_->value);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace p2p::ad
