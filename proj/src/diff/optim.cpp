#include "voxclick/diff/optim.hpp"

#include <algorithm>
#include <cmath>

namespace voxclick::diff {

template <typename T>
void AdamW<T>::step(ParameterSet<T>& params, double lr, double grad_scale) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (const auto& [name, entry] : params.entries()) {
    if (!entry.trainable) continue;
    Tensor<T> p = entry.tensor;
    Matrix<T>& w = p.mutable_value();
    auto [it, fresh] = state_.try_emplace(name);
    Moments& mom = it->second;
    if (fresh) {
      mom.m = Matrix<T>::Zero(w.rows(), w.cols());
      mom.v = Matrix<T>::Zero(w.rows(), w.cols());
    }
    // Decoupled decay applies even to entries that got no gradient this step.
    w *= static_cast<T>(1.0 - lr * config_.weight_decay);
    if (!p.has_grad()) continue;
    const Matrix<T> g = p.node()->grad * static_cast<T>(grad_scale);
    mom.m = static_cast<T>(config_.beta1) * mom.m + static_cast<T>(1.0 - config_.beta1) * g;
    mom.v = static_cast<T>(config_.beta2) * mom.v + static_cast<T>(1.0 - config_.beta2) * g.cwiseProduct(g);
    const T step_size = static_cast<T>(lr / bc1);
    const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
    w.array() -= step_size * mom.m.array() / (mom.v.array().sqrt() * denom_scale + static_cast<T>(config_.eps));
  }
}

double poly_lr(double lr0, double t, double total, double power) {
  if (total <= 0.0) return 0.0;
  const double frac = std::clamp(1.0 - t / total, 0.0, 1.0);
  return lr0 * std::pow(frac, power);
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace voxclick::diff
