#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "voxclick/diff/tensor.hpp"

namespace voxclick::diff {

using Rng = std::mt19937_64;

// Named model state. Trainable entries receive gradients; frozen entries
// (e.g. random Fourier frequencies) are stored and checkpointed but never
// updated. Iteration order is the sorted name order.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    Tensor<T> tensor;
    bool trainable = true;
  };

  Tensor<T> add(const std::string& name, Matrix<T> init, bool trainable = true);
  const Tensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t scalar_count(bool trainable_only = false) const;
  void zero_grad();

 private:
  std::map<std::string, Entry> entries_;
};

// Uniform in +-sqrt(1 / fan_in).
template <typename T>
Matrix<T> uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

template <typename T>
Matrix<T> gaussian(std::size_t rows, std::size_t cols, double sigma, Rng& rng);

template <typename T>
Matrix<T> filled(std::size_t rows, std::size_t cols, T value);

}  // namespace voxclick::diff
