#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gma {

// Dense row-major tensor of doubles with reverse-mode autodiff.
//
// Every op records a node holding its parents and a backward closure. Node
// ids increase in construction order, so sorting reachable nodes by id gives
// a topological order for free; backward() walks it once, accumulating
// gradients additively over fan-out. Graph construction and backward are
// single-threaded per computation. Tensors built while grads are disabled
// carry no graph and are plain immutable values.

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

bool grad_enabled();

// Scoped "stop recording" switch for inference and finite differences.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::vector<double>& grad_buf();  // allocates zeros on first use
};

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> values,
                                     bool requires_grad);

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from_values(Shape shape, std::vector<double> v);
  static Tensor scalar(double v);
  // Leaf that participates in gradients.
  static Tensor param(Shape shape, std::vector<double> v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int dim(int i) const;
  std::size_t numel() const;
  bool requires_grad() const;
  std::uint64_t id() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double value() const;  // scalar tensors only
  double operator()(int i) const;
  double operator()(int i, int j) const;

  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Root must be scalar. Visits each reachable node exactly once in reverse
  // construction order. Interior gradients reset per call; leaf parameters
  // accumulate until zero_grad.
  void backward() const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> n);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

// Shared by all ops: makes the output node and attaches the backward closure
// when any parent needs gradients and recording is on.
Tensor make_op(Shape out_shape, std::vector<double> out_values,
               std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn);

}  // namespace detail

}  // namespace gma
