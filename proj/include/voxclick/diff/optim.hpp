#pragma once

#include <map>
#include <string>

#include "voxclick/diff/parameters.hpp"

namespace voxclick::diff {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Adam with decoupled weight decay. Operates on trainable entries only.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // Applies one update using the gradients currently held by `params`,
  // multiplied by grad_scale (e.g. 1 / batch size).
  void step(ParameterSet<T>& params, double lr, double grad_scale = 1.0);

  long steps() const { return steps_; }

 private:
  struct Moments {
    Matrix<T> m;
    Matrix<T> v;
  };
  AdamWConfig config_;
  std::map<std::string, Moments> state_;
  long steps_ = 0;
};

// lr0 * (1 - t / total)^power, clamped to 0 at and after the endpoint.
double poly_lr(double lr0, double t, double total, double power = 0.9);

}  // namespace voxclick::diff
