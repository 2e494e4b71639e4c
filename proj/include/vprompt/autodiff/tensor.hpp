// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vprompt::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the tape. Leaves carry no parents; interior nodes carry the
// rule that pushes their accumulated grad into their parents.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::string op;  // "leaf" for leaves
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer();
};

/// Dense row-major tensor of doubles with an optional reverse-mode record.
///
/// Copies are shallow: two Tensor values may refer to the same node. Values are
/// treated as immutable once built, except that leaves may be updated in place
/// by an optimizer and grads accumulate during backward().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  /// In-place access for leaves (optimizer updates, finite differences).
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  bool is_leaf() const;
  const std::string& op() const;

  /// A leaf holding a copy of this tensor's values, with no history.
  Tensor detach() const;

  const NodePtr& node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
/// Interior graph links are released afterwards. Throws ShapeError when the
/// loss has more than one element and ValidationError when it has no graph.
void backward(const Tensor& loss);

}  // namespace vprompt::ad
