#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace fetalchd::ad {

/// Dense n-dimensional tensor of 64-bit reals, row-major with the last
/// dimension fastest.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> data);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  int numel() const;
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator()(int a) { return v[static_cast<std::size_t>(a)]; }
  double operator()(int a) const { return v[static_cast<std::size_t>(a)]; }
  double& operator()(int a, int b) {
    return v[static_cast<std::size_t>(a) * shape[1] + b];
  }
  double operator()(int a, int b) const {
    return v[static_cast<std::size_t>(a) * shape[1] + b];
  }
  double& operator()(int n, int c, int h, int w) {
    return v[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) *
                 shape[3] +
             w];
  }
  double operator()(int n, int c, int h, int w) const {
    return v[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) *
                 shape[3] +
             w];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

using NodeId = int;

/// Recorded computation for reverse-mode differentiation. Nodes are appended
/// in execution order, which is already topological; backward() walks the
/// list once in reverse.
class Tape {
 public:
  /// Registers an input or parameter tensor.
  NodeId leaf(Tensor value);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward()'s loss w.r.t. this node.
  const Tensor& grad(NodeId id) const;

  // Primitives. All validate shapes and throw std::invalid_argument on
  // mismatch.
  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, int stride,
                int padding);
  NodeId max_pool2d(NodeId input, int window, int stride);
  NodeId dense(NodeId input, NodeId weight, NodeId bias);
  NodeId relu(NodeId input);
  NodeId global_avg_pool(NodeId input);  // [N,C,H,W] -> [N,C]
  NodeId softmax(NodeId logits);         // row-wise, max-subtracted
  /// Per-sample cross-entropy of probabilities against one-hot targets,
  /// [N,K] -> [N]. Probabilities are floored at 1e-12 inside the log.
  NodeId cross_entropy(NodeId probs, Tensor one_hot);
  NodeId scale(NodeId input, double factor);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId sum(NodeId input);        // -> scalar
  /// Dot product with a constant weight vector, [N] -> scalar. Weights do
  /// not participate in differentiation.
  NodeId weighted_sum(NodeId input, Tensor weights);

  /// Reverse accumulation from a scalar loss node. Populates grad() for
  /// every node that influences the loss.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_valid = false;
    std::function<void(Tape&, NodeId)> backprop;  // null for leaves
  };

  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  Tensor& grad_buffer(NodeId id);
  NodeId push(Tensor value, std::function<void(Tape&, NodeId)> backprop);

  std::vector<Node> nodes_;
};

inline constexpr double kProbFloor = 1e-12;

/// v <- momentum * v + grad;  p <- p - lr * v.
void sgd_momentum_step(std::vector<Tensor>& params,
                       const std::vector<Tensor>& grads,
                       std::vector<Tensor>& velocity, double lr,
                       double momentum);

}  // namespace fetalchd::ad
