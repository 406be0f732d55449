#include "voxclick/diff/tensor.hpp"

#include <unordered_set>

namespace voxclick::diff {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

std::string shape_str(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename T>
Tensor<T> make_op(const char* op, Matrix<T> value, std::vector<Tensor<T>> inputs,
                  std::function<void(Node<T>&)> backward) {
  if (!value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) {
      if (in.defined()) node->parents.push_back(in.node());
    }
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace detail

template <typename T>
Tensor<T> Tensor<T>::constant(Matrix<T> value) {
  if (!value.allFinite()) throw NumericError("non-finite constant");
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Matrix<T> value) {
  if (!value.allFinite()) throw NumericError("non-finite parameter");
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(std::size_t rows, std::size_t cols) {
  return constant(Matrix<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v) {
  Matrix<T> m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

template <typename T>
Tensor<T> Tensor<T>::row(const std::vector<T>& values) {
  Matrix<T> m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return constant(std::move(m));
}

template <typename T>
Matrix<T>& Tensor<T>::mutable_value() {
  detail::require(node_->parents.empty() && !node_->backward, "mutable_value on a non-leaf tensor");
  return node_->value;
}

template <typename T>
Matrix<T> Tensor<T>::grad() const {
  if (node_->grad.size() == 0) return Matrix<T>::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

template <typename T>
T Tensor<T>::item() const {
  detail::require(size() == 1, "item() on tensor of shape " + detail::shape_str(rows(), cols()));
  return node_->value(0, 0);
}

template <typename T>
void Tensor<T>::backward() const {
  detail::require(size() == 1, "backward() needs a 1x1 root, got " + detail::shape_str(rows(), cols()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first). The
  // order owns its nodes: releasing a closure below may drop the last other
  // reference to a parent that has yet to run.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      std::shared_ptr<Node<T>> p = top.first->parents[top.second++];
      if (p->requires_grad && visited.insert(p.get()).second) stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix<T>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = it->get();
    if (n->backward && n->grad.size() != 0) {
      n->backward(*n);
    }
    // Interior nodes are not reused after their backward ran.
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> detail::make_op<float>(const char*, Matrix<float>, std::vector<Tensor<float>>,
                                              std::function<void(Node<float>&)>);
template Tensor<double> detail::make_op<double>(const char*, Matrix<double>, std::vector<Tensor<double>>,
                                                std::function<void(Node<double>&)>);

}  // namespace voxclick::diff
