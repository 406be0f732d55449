#include "voxclick/diff/parameters.hpp"

#include <cmath>

namespace voxclick::diff {

template <typename T>
Tensor<T> ParameterSet<T>::add(const std::string& name, Matrix<T> init, bool trainable) {
  if (entries_.count(name)) throw ConfigError("parameter registered twice: " + name);
  Tensor<T> t = trainable ? Tensor<T>::parameter(std::move(init)) : Tensor<T>::constant(std::move(init));
  entries_.emplace(name, Entry{t, trainable});
  return t;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw NotFound("unknown parameter " + name);
  return it->second.tensor;
}

template <typename T>
std::vector<std::string> ParameterSet<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) {
    if (!trainable_only || e.trainable) n += e.tensor.size();
  }
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [_, e] : entries_) {
    Tensor<T> t = e.tensor;
    t.zero_grad();
  }
}

template <typename T>
Matrix<T> uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

template <typename T>
Matrix<T> gaussian(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

template <typename T>
Matrix<T> filled(std::size_t rows, std::size_t cols, T value) {
  return Matrix<T>::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), value);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template Matrix<float> uniform_fan_in<float>(std::size_t, std::size_t, std::size_t, Rng&);
template Matrix<double> uniform_fan_in<double>(std::size_t, std::size_t, std::size_t, Rng&);
template Matrix<float> gaussian<float>(std::size_t, std::size_t, double, Rng&);
template Matrix<double> gaussian<double>(std::size_t, std::size_t, double, Rng&);
template Matrix<float> filled<float>(std::size_t, std::size_t, float);
template Matrix<double> filled<double>(std::size_t, std::size_t, double);

}  // namespace voxclick::diff
