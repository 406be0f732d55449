#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "voxclick/diff/tensor.hpp"

namespace voxclick::diff {

// y = a * b
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// y = a * b^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise; b may also be a 1 x cols row broadcast over a's rows.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// y = x * w + b, with b a 1 x d_out row. An undefined b means no bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Per-row normalization with learnable 1 x d scale/shift.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

// Scaled dot-product attention over already-projected q/k/v, split into
// `heads` column groups. q: n_q x d, k and v: n_k x d. Softmax is computed
// with max subtraction.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads);

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count);
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Row-wise max over a subset of columns -> n x 1. Gradient goes to the
// first maximal column.
template <typename T>
Tensor<T> rowwise_max(const Tensor<T>& x, std::span<const std::int32_t> cols);

// Rulebook-driven sparse convolution; see sparse_conv.hpp for construction.
struct Rulebook;
template <typename T>
Tensor<T> sparse_conv(const Tensor<T>& features, const std::shared_ptr<const Rulebook>& rules,
                      const Tensor<T>& weights);

}  // namespace voxclick::diff
