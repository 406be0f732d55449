#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "voxclick/diff/tensor.hpp"

namespace voxclick::diff {

struct GradCheckOptions {
  double eps = 1e-6;
  // 0 checks every entry; otherwise a seeded random subset per input.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_entry = 0;
};

// Compares the reverse-mode gradient of a scalar f w.r.t. each leaf input with
// central differences: max |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check_detailed(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> inputs,
                                    const GradCheckOptions& options = {});

double grad_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> inputs, double eps = 1e-6);

}  // namespace voxclick::diff
