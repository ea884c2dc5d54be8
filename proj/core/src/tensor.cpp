#include "gma/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gma {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_id{1};
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace detail {

std::vector<double>& TensorNode::grad_buf() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> values,
                                     bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match value count");
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Tensor make_op(Shape out_shape, std::vector<double> out_values,
               std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents)
      if (p.defined() && p.requires_grad()) needs = true;
  }
  auto n = new_node(std::move(out_shape), std::move(out_values), needs);
  if (needs) {
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(n));
}

}  // namespace detail

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_numel(shape);
  return wrap(detail::new_node(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double v) {
  std::size_t n = shape_numel(shape);
  return wrap(detail::new_node(std::move(shape), std::vector<double>(n, v), false));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> v) {
  return wrap(detail::new_node(std::move(shape), std::move(v), false));
}

Tensor Tensor::scalar(double v) { return from_values({1}, {v}); }

Tensor Tensor::param(Shape shape, std::vector<double> v) {
  return wrap(detail::new_node(std::move(shape), std::move(v), true));
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::runtime_error("tensor: undefined");
  return node_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size()))
    throw std::out_of_range("tensor: dim index");
  return s[static_cast<std::size_t>(i)];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }

std::vector<double>& Tensor::values() {
  if (!node_) throw std::runtime_error("tensor: undefined");
  return node_->values;
}

const std::vector<double>& Tensor::values() const {
  if (!node_) throw std::runtime_error("tensor: undefined");
  return node_->values;
}

double Tensor::value() const {
  if (numel() != 1) throw std::invalid_argument("tensor: value() needs a scalar");
  return values()[0];
}

double Tensor::operator()(int i) const {
  return values().at(static_cast<std::size_t>(i));
}

double Tensor::operator()(int i, int j) const {
  if (ndim() != 2) throw std::invalid_argument("tensor: (i,j) needs 2-d");
  int cols = shape()[1];
  return values().at(static_cast<std::size_t>(i) * cols + j);
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor: no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (!node_) throw std::runtime_error("tensor: undefined");
  if (numel() != 1)
    throw std::invalid_argument("tensor: backward() needs a scalar root");
  if (!node_->requires_grad) return;

  // Reachable subgraph that requires gradients, via iterative DFS.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> seen;
  std::vector<detail::TensorNode*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    detail::TensorNode* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
    }
  }
  // Ids increase in construction order, so descending id is topological.
  std::sort(order.begin(), order.end(),
            [](const detail::TensorNode* a, const detail::TensorNode* b) {
              return a->id > b->id;
            });

  // Interior gradients reset per call; only leaves accumulate across calls.
  for (detail::TensorNode* n : order)
    if (n->backward_fn) n->grad.clear();

  node_->grad_buf()[0] += 1.0;
  for (detail::TensorNode* n : order) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace gma
