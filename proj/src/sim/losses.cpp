#include "voxclick/sim/losses.hpp"

#include <cmath>

namespace voxclick::sim {

using diff::Matrix;
using diff::Node;
using diff::Tensor;

namespace {

template <typename T>
void check_target(const Tensor<T>& logits, std::span<const std::uint8_t> target, const char* who) {
  if (logits.cols() != 1 || logits.rows() != target.size() || target.empty()) {
    throw ContractViolation(std::string(who) + ": expected n x 1 logits and n targets, got " +
                            diff::detail::shape_str(logits.rows(), logits.cols()) + " and " +
                            std::to_string(target.size()));
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& logits, std::span<const std::uint8_t> target, double smoothing) {
  check_target(logits, target, "dice_loss");
  const auto n = static_cast<Eigen::Index>(target.size());
  std::vector<double> p(target.size());
  double inter = 0, sum_p = 0, sum_g = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = sigmoid(static_cast<double>(logits.value()(i, 0)));
    const double g = target[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    p[static_cast<std::size_t>(i)] = pi;
    inter += pi * g;
    sum_p += pi;
    sum_g += g;
  }
  const double num = 2.0 * inter + smoothing;
  const double den = sum_p + sum_g + smoothing;
  Matrix<T> y(1, 1);
  y(0, 0) = static_cast<T>(1.0 - num / den);
  auto in = logits.node();
  std::vector<std::uint8_t> g(target.begin(), target.end());
  return diff::detail::make_op<T>("dice_loss", std::move(y), {logits},
                                  [in, p = std::move(p), g = std::move(g), num, den](Node<T>& self) {
                                    if (!in->requires_grad) return;
                                    const double up = static_cast<double>(self.grad(0, 0));
                                    Matrix<T> dx(static_cast<Eigen::Index>(p.size()), 1);
                                    for (std::size_t i = 0; i < p.size(); ++i) {
                                      const double gi = g[i] ? 1.0 : 0.0;
                                      const double dp = -(2.0 * gi * den - num) / (den * den);
                                      dx(static_cast<Eigen::Index>(i), 0) =
                                          static_cast<T>(up * dp * p[i] * (1.0 - p[i]));
                                    }
                                    in->accumulate(dx);
                                  });
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, std::span<const std::uint8_t> target) {
  check_target(logits, target, "bce_with_logits");
  const std::size_t n = target.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(logits.value()(static_cast<Eigen::Index>(i), 0));
    const double g = target[i] ? 1.0 : 0.0;
    total += std::max(x, 0.0) - x * g + std::log1p(std::exp(-std::abs(x)));
  }
  Matrix<T> y(1, 1);
  y(0, 0) = static_cast<T>(total / static_cast<double>(n));
  auto in = logits.node();
  std::vector<std::uint8_t> g(target.begin(), target.end());
  return diff::detail::make_op<T>("bce_with_logits", std::move(y), {logits}, [in, g = std::move(g)](Node<T>& self) {
    if (!in->requires_grad) return;
    const double up = static_cast<double>(self.grad(0, 0)) / static_cast<double>(g.size());
    Matrix<T> dx(in->value.rows(), 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      dx(r, 0) = static_cast<T>(up * (sigmoid(static_cast<double>(in->value(r, 0))) - (g[i] ? 1.0 : 0.0)));
    }
    in->accumulate(dx);
  });
}

template Tensor<float> dice_loss(const Tensor<float>&, std::span<const std::uint8_t>, double);
template Tensor<double> dice_loss(const Tensor<double>&, std::span<const std::uint8_t>, double);
template Tensor<float> bce_with_logits(const Tensor<float>&, std::span<const std::uint8_t>);
template Tensor<double> bce_with_logits(const Tensor<double>&, std::span<const std::uint8_t>);

}  // namespace voxclick::sim
