// SPDX-License-Identifier: Apache-2.0
#include "vprompt/autodiff/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "vprompt/core/errors.hpp"

namespace vprompt::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-length axis in shape " + shape_str(shape));
  }
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " + std::to_string(numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  node_->op = "leaf";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::size() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

bool Tensor::is_leaf() const { return node_->parents.empty() && !node_->backward; }

const std::string& Tensor::op() const { return node_->op; }

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ValidationError("backward: undefined loss");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw ValidationError("backward: loss is not connected to any parameter");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Free the tape: interior nodes drop their links and temporary grads.
  for (Node* node : order) {
    if (node->backward) {
      node->parents.clear();
      node->backward = nullptr;
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace vprompt::ad
