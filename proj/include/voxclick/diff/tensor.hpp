#pragma once

// Reverse-mode differentiable 2-D tensors.
//
// A Tensor is a cheap handle onto a graph node. Values never change after the
// op that produced them returns; leaves (parameters) may be updated in place by
// an optimizer between steps. Graph recording happens only when grad mode is
// enabled on the calling thread and at least one input requires a gradient.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxclick/errors.hpp"

namespace voxclick::diff {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<std::size_t>;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into parents.
  std::function<void(Node& self)> backward;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

bool grad_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor constant(Matrix<T> value);
  static Tensor parameter(Matrix<T> value);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor scalar(T v);
  static Tensor row(const std::vector<T>& values);

  bool defined() const { return static_cast<bool>(node_); }
  std::size_t rows() const { return static_cast<std::size_t>(node_->value.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(node_->value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(node_->value.size()); }
  Shape shape() const { return {rows(), cols()}; }

  const Matrix<T>& value() const { return node_->value; }
  // Leaves only: optimizer updates and finite-difference perturbation.
  Matrix<T>& mutable_value();

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  // Zero matrix of the value's shape when nothing has flowed in yet.
  Matrix<T> grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  T item() const;

  // Seeds d(self)/d(self) = 1 and propagates. Self must be 1x1.
  void backward() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Wraps a freshly computed value into a tensor, recording the backward
// closure when any input requires a gradient. Throws NumericError on NaN/Inf.
template <typename T>
Tensor<T> make_op(const char* op, Matrix<T> value, std::vector<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> backward);

void require(bool cond, const std::string& what);

std::string shape_str(std::size_t rows, std::size_t cols);

}  // namespace detail

}  // namespace voxclick::diff
