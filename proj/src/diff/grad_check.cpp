#include "voxclick/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace voxclick::diff {

namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  const Tensor<double> y = f();
  detail::require(y.size() == 1, "grad_check: f must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: f is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check_detailed(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> inputs,
                                    const GradCheckOptions& options) {
  for (auto& in : inputs) {
    detail::require(in.requires_grad(), "grad_check: every input must be a trainable leaf");
    in.zero_grad();
  }
  {
    const Tensor<double> y = f();
    detail::require(y.size() == 1, "grad_check: f must return a scalar");
    if (!std::isfinite(y.item())) throw NumericError("grad_check: f is not finite");
    y.backward();
  }
  std::vector<Matrix<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix<double>& v = inputs[i].mutable_value();
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(v.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (options.max_entries_per_input > 0 && entries.size() > options.max_entries_per_input) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_input);
    }
    for (Eigen::Index e : entries) {
      const double saved = v.data()[e];
      v.data()[e] = saved + options.eps;
      const double up = evaluate(f);
      v.data()[e] = saved - options.eps;
      const double down = evaluate(f);
      v.data()[e] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = std::abs(analytic[i].data()[e] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.entries_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = i;
        result.worst_entry = static_cast<std::size_t>(e);
      }
    }
  }
  return result;
}

double grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> inputs, double eps) {
  GradCheckOptions options;
  options.eps = eps;
  return grad_check_detailed(f, inputs, options).max_rel_error;
}

}  // namespace voxclick::diff
