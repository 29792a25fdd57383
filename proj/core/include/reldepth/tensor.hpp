#pragma once

// Dense float64 arrays with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto an immutable node. Operations on tensors
// that require gradients record their parents and a backward closure; the
// graph reachable from a scalar loss is the tape replayed by backward().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "reldepth/mask.hpp"

namespace reldepth {

struct TensorNode;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  // Writable storage of a leaf tensor (no recorded parents). Used by the
  // optimizer between steps; throws for tensors produced by an operation.
  std::span<double> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no history, no gradient tracking.
  Tensor detach() const;
  // Deep copy of values; history is not copied.
  Tensor clone(bool requires_grad) const;

  bool is_leaf() const;
  const TensorNode* node() const { return node_.get(); }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(TensorNode&)> backward_fn;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// While alive, collects the branch taken by every element of every relu and
// abs evaluated on the current thread. Two evaluations with equal patterns
// lie in the same smooth piece of a piecewise-smooth function.
class KinkRecorder {
 public:
  KinkRecorder();
  ~KinkRecorder();
  KinkRecorder(const KinkRecorder&) = delete;
  KinkRecorder& operator=(const KinkRecorder&) = delete;

  const std::vector<std::uint8_t>& pattern() const { return pattern_; }
  void record(std::uint8_t branch) { pattern_.push_back(branch); }

 private:
  std::vector<std::uint8_t> pattern_;
  KinkRecorder* previous_;
};

KinkRecorder* active_kink_recorder();

// Elementwise arithmetic. Either operand may be a one-element tensor, which
// is broadcast against the other; any other shape mismatch throws ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor scale(const Tensor& a, double factor);
// abs'(0) is taken to be 0.
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, double b) { return add(a, -b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

// Masked reductions to a one-element tensor. Masked-out elements contribute
// nothing; mean divides by the number of unmasked elements. A reduction with
// every element masked throws DegenerateError.
Tensor sum(const Tensor& a, const Mask* mask = nullptr);
Tensor mean(const Tensor& a, const Mask* mask = nullptr);

Tensor reshape(const Tensor& a, Shape shape);

// Stride-1, zero same-padded 2-D convolution.
//   input:   {C, H, W}
//   weights: {O, C, K, K} with K odd
//   bias:    {O}
// returns    {O, H, W}
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Topologically ordered record of the graph reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  // Nodes that require grad, parents before children.
  std::span<TensorNode* const> nodes() const { return nodes_; }

  // Seeds the root gradient and runs every backward closure once, children
  // before parents. Leaf gradients accumulate across calls.
  void backward(std::span<const double> seed);

 private:
  std::vector<TensorNode*> nodes_;
  std::shared_ptr<TensorNode> root_;
};

// Populates gradients of every requires_grad ancestor of a scalar loss.
void backward(const Tensor& loss);

}  // namespace reldepth
