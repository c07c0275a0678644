// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pvl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node &out)>;

// One vertex of the reverse-mode tape. Leaves have no parents and no
// backward function; op outputs keep both until backward() releases them.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad; // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  double *grad_buffer(); // allocates zeros on first use
};

} // namespace detail

/// Dense float64 array with an optional gradient slot.
///
/// A Tensor is a handle: copies share storage and graph position, which is
/// what lets a model's parameter and the tape node that consumes it be the
/// same object. Use clone() for an independent deep copy.
///
/// Element-wise and row-wise operations treat a tensor as a matrix of
/// rows() x cols(), where cols() is the last dimension.
class Tensor {
public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const Shape &shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Direct write access. Only valid on leaves; mutating a tensor that sits
  /// inside a live graph invalidates the recorded backward pass.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  /// True for tensors created directly rather than by an op.
  bool is_leaf() const;

  /// Same values, cut from the graph, gradient tracking off.
  Tensor detach() const;
  /// Deep copy of values and requires_grad flag; no gradient, no graph.
  Tensor clone() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether ops record onto the tape on this thread.
bool grad_enabled();

/// Disables tape recording for its lifetime on the current thread.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

/// Reverse pass from a scalar loss. Accumulates into every reachable
/// requires_grad tensor, then releases the recorded graph.
void backward(const Tensor &loss);

namespace detail {

// Builds an op output. Parents and the backward closure are attached only
// when recording is on and some parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<Tensor> parents, BackwardFn fn);

} // namespace detail

} // namespace pvl
