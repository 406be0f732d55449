#pragma once

#include <string>

#include "voxclick/diff/ops.hpp"
#include "voxclick/diff/parameters.hpp"

namespace voxclick::diff {

template <typename T>
struct Linear {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // 1 x out

  static Linear create(ParameterSet<T>& params, const std::string& prefix, std::size_t in, std::size_t out,
                       Rng& rng) {
    Linear l;
    l.weight = params.add(prefix + ".weight", uniform_fan_in<T>(in, out, in, rng));
    l.bias = params.add(prefix + ".bias", filled<T>(1, out, T(0)));
    return l;
  }

  static Linear bind(const ParameterSet<T>& params, const std::string& prefix) {
    return {params.at(prefix + ".weight"), params.at(prefix + ".bias")};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  static LayerNorm create(ParameterSet<T>& params, const std::string& prefix, std::size_t dim) {
    return {params.add(prefix + ".gamma", filled<T>(1, dim, T(1))), params.add(prefix + ".beta", filled<T>(1, dim, T(0)))};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, T(1e-5)); }
};

// Projections q/k/v into an internal width, per-head attention, then an output
// projection back to the model width.
template <typename T>
struct MultiHeadAttention {
  Linear<T> q_proj, k_proj, v_proj, out_proj;
  int heads = 1;

  static MultiHeadAttention create(ParameterSet<T>& params, const std::string& prefix, std::size_t model_dim,
                                   std::size_t internal_dim, int heads, Rng& rng) {
    if (heads <= 0 || internal_dim % static_cast<std::size_t>(heads) != 0) {
      throw ConfigError(prefix + ": internal width " + std::to_string(internal_dim) + " not divisible by " +
                        std::to_string(heads) + " heads");
    }
    MultiHeadAttention a;
    a.q_proj = Linear<T>::create(params, prefix + ".q", model_dim, internal_dim, rng);
    a.k_proj = Linear<T>::create(params, prefix + ".k", model_dim, internal_dim, rng);
    a.v_proj = Linear<T>::create(params, prefix + ".v", model_dim, internal_dim, rng);
    a.out_proj = Linear<T>::create(params, prefix + ".out", internal_dim, model_dim, rng);
    a.heads = heads;
    return a;
  }

  Tensor<T> operator()(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) const {
    return out_proj(attention(q_proj(q), k_proj(k), v_proj(v), heads));
  }

  // Variant taking a precomputed value projection (reused across calls that
  // share the same key/value source).
  Tensor<T> with_projected(const Tensor<T>& q, const Tensor<T>& k_projected, const Tensor<T>& v_projected) const {
    return out_proj(attention(q_proj(q), k_projected, v_projected, heads));
  }
};

template <typename T>
Tensor<T> multihead_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              const MultiHeadAttention<T>& layer) {
  return layer(q, k, v);
}

}  // namespace voxclick::diff
