#pragma once

// Minimal reverse-mode differentiation over dense row-major float64 arrays.
//
// Every op returns a new DiffArray whose node keeps its inputs alive; the
// graph is a DAG and backward() walks it in reverse topological order from a
// scalar sink. Leaf arrays created with variable() accumulate gradients.

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hemlets::ad {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  /// Adds this node's gradient contribution into its parents' grads.
  std::function<void()> backward;
};
}  // namespace detail

class DiffArray {
 public:
  DiffArray() = default;

  static DiffArray constant(Shape shape, std::vector<double> values);
  static DiffArray variable(Shape shape, std::vector<double> values);
  static DiffArray zeros(Shape shape, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const { return node_->shape[axis]; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  std::span<const double> values() const { return node_->value; }
  /// Direct access for optimiser updates on leaf parameters.
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  double item() const;
  void zero_grad();

  /// Internal; used by the op implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit DiffArray(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Element-wise sum. `b` may also be rank 1 matching the last axis of `a` (row broadcast).
DiffArray add(const DiffArray& a, const DiffArray& b);
DiffArray sub(const DiffArray& a, const DiffArray& b);
/// Element-wise product of equal shapes.
DiffArray multiply(const DiffArray& a, const DiffArray& b);
DiffArray scale(const DiffArray& a, double factor);
/// (m x k) * (k x n).
DiffArray matmul(const DiffArray& a, const DiffArray& b);
DiffArray relu(const DiffArray& a);
DiffArray reshape(const DiffArray& a, Shape shape);
/// Concatenate two rank-2 arrays along axis 1.
DiffArray concat_columns(const DiffArray& a, const DiffArray& b);
/// Volume logits from a per-row plane and a per-row depth profile:
/// out[r, z, i] = plane[r, i] + depth[r, z]. Inputs are [R, H*W] and [R, D]; output is [R, D*H*W].
DiffArray depth_plane_sum(const DiffArray& plane, const DiffArray& depth);
/// Softmax of temperature * a over its last `trailing_axes` axes.
DiffArray softmax_over_axes(const DiffArray& a, int trailing_axes, double temperature = 1.0);
DiffArray sum(const DiffArray& a);
DiffArray abs_sum(const DiffArray& a);
DiffArray square_sum(const DiffArray& a);
/// Expected (x, y, z) voxel index under each D x H x W probability block.
/// Input size must be a multiple of D*H*W; output shape is [blocks, 3].
DiffArray expectation_over_grid(const DiffArray& probabilities, int depth, int height, int width);

/// Re-zeros every gradient reachable from `sink`, then back-propagates d sink / d node.
/// Throws rank error if sink is not a single element.
void backward(const DiffArray& sink);

}  // namespace hemlets::ad
