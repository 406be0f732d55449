#include "voxclick/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxclick/diff/sparse_conv.hpp"

namespace voxclick::diff {

using detail::make_op;
using detail::require;
using detail::shape_str;

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
bool is_row_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1;
}

template <typename T>
void check_binary(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape() || is_row_broadcast(a, b),
          std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
              shape_str(b.rows(), b.cols()));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.cols() == b.rows(), "matmul: " + shape_str(a.rows(), a.cols()) + " * " + shape_str(b.rows(), b.cols()));
  Matrix<T> y = a.value() * b.value();
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("matmul", std::move(y), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * self.grad);
  });
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.cols() == b.cols(), "matmul_nt: " + shape_str(a.rows(), a.cols()) + " * " +
                                    shape_str(b.rows(), b.cols()) + "^T");
  Matrix<T> y = a.value() * b.value().transpose();
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("matmul_nt", std::move(y), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value);
    if (bn->requires_grad) bn->accumulate(self.grad.transpose() * an->value);
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_binary("add", a, b);
  const bool bcast = is_row_broadcast(a, b);
  Matrix<T> y = bcast ? Matrix<T>(a.value().rowwise() + b.value().row(0)) : Matrix<T>(a.value() + b.value());
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("add", std::move(y), {a, b}, [an, bn, bcast](Node<T>& self) {
    an->accumulate(self.grad);
    if (bn->requires_grad) {
      if (bcast) {
        bn->accumulate(Matrix<T>(self.grad.colwise().sum()));
      } else {
        bn->accumulate(self.grad);
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_binary("sub", a, b);
  const bool bcast = is_row_broadcast(a, b);
  Matrix<T> y = bcast ? Matrix<T>(a.value().rowwise() - b.value().row(0)) : Matrix<T>(a.value() - b.value());
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("sub", std::move(y), {a, b}, [an, bn, bcast](Node<T>& self) {
    an->accumulate(self.grad);
    if (bn->requires_grad) {
      if (bcast) {
        bn->accumulate(Matrix<T>(-self.grad.colwise().sum()));
      } else {
        bn->accumulate(Matrix<T>(-self.grad));
      }
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  Matrix<T> y = a.value().cwiseProduct(b.value());
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("mul", std::move(y), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad) an->accumulate(self.grad.cwiseProduct(bn->value));
    if (bn->requires_grad) bn->accumulate(self.grad.cwiseProduct(an->value));
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Matrix<T> y = a.value() * factor;
  NodePtr<T> an = a.node();
  return make_op<T>("scale", std::move(y), {a},
                    [an, factor](Node<T>& self) { an->accumulate(self.grad * factor); });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.cols() == w.rows(), "linear: x " + shape_str(x.rows(), x.cols()) + " vs w " + shape_str(w.rows(), w.cols()));
  const bool has_bias = b.defined();
  if (has_bias) {
    require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape " + shape_str(b.rows(), b.cols()));
  }
  Matrix<T> y = x.value() * w.value();
  if (has_bias) y.rowwise() += b.value().row(0);
  NodePtr<T> xn = x.node(), wn = w.node();
  NodePtr<T> bn = has_bias ? b.node() : nullptr;
  std::vector<Tensor<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_op<T>("linear", std::move(y), std::move(inputs), [xn, wn, bn](Node<T>& self) {
    if (xn->requires_grad) xn->accumulate(self.grad * wn->value.transpose());
    if (wn->requires_grad) wn->accumulate(xn->value.transpose() * self.grad);
    if (bn && bn->requires_grad) bn->accumulate(Matrix<T>(self.grad.colwise().sum()));
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Matrix<T> y = x.value().cwiseMax(T(0));
  NodePtr<T> xn = x.node();
  return make_op<T>("relu", std::move(y), {x}, [xn](Node<T>& self) {
    xn->accumulate(Matrix<T>((xn->value.array() > T(0)).select(self.grad, T(0))));
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const auto d = static_cast<Eigen::Index>(x.cols());
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.shape() == gamma.shape(),
          "layer_norm: scale/shift must be 1 x " + std::to_string(d));
  const auto n = static_cast<Eigen::Index>(x.rows());
  Matrix<T> xhat(n, d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = x.value().row(r);
    const T mu = row.mean();
    const T var = (row.array() - mu).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (row.array() - mu) * inv_std(r);
  }
  Matrix<T> y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  NodePtr<T> xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op<T>("layer_norm", std::move(y), {x, gamma, beta},
                    [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
                      const Matrix<T>& g = self.grad;
                      if (gn->requires_grad) gn->accumulate(Matrix<T>(g.cwiseProduct(xhat).colwise().sum()));
                      if (bn->requires_grad) bn->accumulate(Matrix<T>(g.colwise().sum()));
                      if (!xn->requires_grad) return;
                      Matrix<T> dxhat = g.array().rowwise() * gn->value.row(0).array();
                      Matrix<T> dx(g.rows(), g.cols());
                      for (Eigen::Index r = 0; r < g.rows(); ++r) {
                        const T m1 = dxhat.row(r).mean();
                        const T m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                        dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                      }
                      xn->accumulate(dx);
                    });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads) {
  if (heads <= 0 || q.cols() % static_cast<std::size_t>(heads) != 0) {
    throw ConfigError("attention: width " + std::to_string(q.cols()) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  require(k.cols() == q.cols() && v.cols() == q.cols(), "attention: q/k/v width mismatch");
  require(k.rows() == v.rows() && k.rows() > 0, "attention: k/v row mismatch");
  const auto nq = static_cast<Eigen::Index>(q.rows());
  const auto dh = static_cast<Eigen::Index>(q.cols()) / heads;
  const T s = T(1) / std::sqrt(static_cast<T>(dh));

  std::vector<Matrix<T>> probs(static_cast<std::size_t>(heads));
  Matrix<T> y(nq, static_cast<Eigen::Index>(q.cols()));
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Matrix<T> logits = (q.value().middleCols(c0, dh) * k.value().middleCols(c0, dh).transpose()) * s;
    for (Eigen::Index r = 0; r < nq; ++r) {
      const T mx = logits.row(r).maxCoeff();
      logits.row(r) = (logits.row(r).array() - mx).exp();
      logits.row(r) /= logits.row(r).sum();
    }
    y.middleCols(c0, dh) = logits * v.value().middleCols(c0, dh);
    probs[static_cast<std::size_t>(h)] = std::move(logits);
  }

  NodePtr<T> qn = q.node(), kn = k.node(), vn = v.node();
  return make_op<T>("attention", std::move(y), {q, k, v},
                    [qn, kn, vn, probs = std::move(probs), heads, dh, s](Node<T>& self) {
                      Matrix<T> dq, dk, dv;
                      if (qn->requires_grad) dq = Matrix<T>::Zero(qn->value.rows(), qn->value.cols());
                      if (kn->requires_grad) dk = Matrix<T>::Zero(kn->value.rows(), kn->value.cols());
                      if (vn->requires_grad) dv = Matrix<T>::Zero(vn->value.rows(), vn->value.cols());
                      for (int h = 0; h < heads; ++h) {
                        const Eigen::Index c0 = h * dh;
                        const Matrix<T>& p = probs[static_cast<std::size_t>(h)];
                        const auto go = self.grad.middleCols(c0, dh);
                        if (vn->requires_grad) dv.middleCols(c0, dh) += p.transpose() * go;
                        if (!qn->requires_grad && !kn->requires_grad) continue;
                        Matrix<T> dp = go * vn->value.middleCols(c0, dh).transpose();
                        Eigen::Matrix<T, Eigen::Dynamic, 1> inner = dp.cwiseProduct(p).rowwise().sum();
                        Matrix<T> ds = (p.array() * (dp.array().colwise() - inner.array())).matrix() * s;
                        if (qn->requires_grad) dq.middleCols(c0, dh) += ds * kn->value.middleCols(c0, dh);
                        if (kn->requires_grad) dk.middleCols(c0, dh) += ds.transpose() * qn->value.middleCols(c0, dh);
                      }
                      if (qn->requires_grad) qn->accumulate(dq);
                      if (kn->requires_grad) kn->accumulate(dk);
                      if (vn->requires_grad) vn->accumulate(dv);
                    });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix<T> y(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<NodePtr<T>> nodes;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    y.middleRows(at, static_cast<Eigen::Index>(p.rows())) = p.value();
    nodes.push_back(p.node());
    offsets.push_back(at);
    at += static_cast<Eigen::Index>(p.rows());
  }
  return make_op<T>("concat_rows", std::move(y), std::vector<Tensor<T>>(parts.begin(), parts.end()),
                    [nodes, offsets](Node<T>& self) {
                      for (std::size_t i = 0; i < nodes.size(); ++i) {
                        if (!nodes[i]->requires_grad) continue;
                        nodes[i]->accumulate(Matrix<T>(self.grad.middleRows(offsets[i], nodes[i]->value.rows())));
                      }
                    });
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rows() == b.rows(), "concat_cols: row mismatch");
  const auto ca = static_cast<Eigen::Index>(a.cols());
  const auto cb = static_cast<Eigen::Index>(b.cols());
  Matrix<T> y(static_cast<Eigen::Index>(a.rows()), ca + cb);
  y.leftCols(ca) = a.value();
  y.rightCols(cb) = b.value();
  NodePtr<T> an = a.node(), bn = b.node();
  return make_op<T>("concat_cols", std::move(y), {a, b}, [an, bn, ca, cb](Node<T>& self) {
    if (an->requires_grad) an->accumulate(Matrix<T>(self.grad.leftCols(ca)));
    if (bn->requires_grad) bn->accumulate(Matrix<T>(self.grad.rightCols(cb)));
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require(begin + count <= x.rows(), "slice_rows: out of range");
  const auto b = static_cast<Eigen::Index>(begin);
  const auto c = static_cast<Eigen::Index>(count);
  Matrix<T> y = x.value().middleRows(b, c);
  NodePtr<T> xn = x.node();
  return make_op<T>("slice_rows", std::move(y), {x}, [xn, b, c](Node<T>& self) {
    Matrix<T> g = Matrix<T>::Zero(xn->value.rows(), xn->value.cols());
    g.middleRows(b, c) = self.grad;
    xn->accumulate(g);
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows) {
  Matrix<T> y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x.cols()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && static_cast<std::size_t>(rows[i]) < x.rows(), "gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = x.value().row(rows[i]);
  }
  NodePtr<T> xn = x.node();
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return make_op<T>("gather_rows", std::move(y), {x}, [xn, idx = std::move(idx)](Node<T>& self) {
    Matrix<T> g = Matrix<T>::Zero(xn->value.rows(), xn->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    xn->accumulate(g);
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Matrix<T> y(1, 1);
  y(0, 0) = x.value().sum();
  NodePtr<T> xn = x.node();
  return make_op<T>("sum", std::move(y), {x}, [xn](Node<T>& self) {
    xn->accumulate(Matrix<T>::Constant(xn->value.rows(), xn->value.cols(), self.grad(0, 0)));
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  require(x.size() > 0, "mean: empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> rowwise_max(const Tensor<T>& x, std::span<const std::int32_t> cols) {
  require(!cols.empty(), "rowwise_max: no columns selected");
  for (auto c : cols) require(c >= 0 && static_cast<std::size_t>(c) < x.cols(), "rowwise_max: column out of range");
  const auto n = static_cast<Eigen::Index>(x.rows());
  Matrix<T> y(n, 1);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    std::int32_t best = cols[0];
    for (auto c : cols) {
      if (x.value()(r, c) > x.value()(r, best)) best = c;
    }
    arg[static_cast<std::size_t>(r)] = best;
    y(r, 0) = x.value()(r, best);
  }
  NodePtr<T> xn = x.node();
  return make_op<T>("rowwise_max", std::move(y), {x}, [xn, arg = std::move(arg)](Node<T>& self) {
    Matrix<T> g = Matrix<T>::Zero(xn->value.rows(), xn->value.cols());
    for (std::size_t r = 0; r < arg.size(); ++r) g(static_cast<Eigen::Index>(r), arg[r]) = self.grad(static_cast<Eigen::Index>(r), 0);
    xn->accumulate(g);
  });
}

template <typename T>
Tensor<T> sparse_conv(const Tensor<T>& features, const std::shared_ptr<const Rulebook>& rulebook,
                      const Tensor<T>& weights) {
  require(rulebook != nullptr, "sparse_conv: null rulebook");
  const Rulebook& rules = *rulebook;
  require(features.rows() == rules.n_in, "sparse_conv: " + std::to_string(features.rows()) +
                                             " feature rows for a rulebook over " + std::to_string(rules.n_in));
  const auto c_in = static_cast<Eigen::Index>(features.cols());
  const auto c_out = static_cast<Eigen::Index>(weights.cols());
  require(weights.rows() == static_cast<std::size_t>(rules.kernel_volume) * features.cols(),
          "sparse_conv: weight rows " + std::to_string(weights.rows()) + " != volume * in_channels");

  const Matrix<T>& f = features.value();
  const Matrix<T>& w = weights.value();
  Matrix<T> y = Matrix<T>::Zero(static_cast<Eigen::Index>(rules.n_out), c_out);
  Matrix<T> gathered, partial;
  for (int k = 0; k < rules.kernel_volume; ++k) {
    const auto& in = rules.in_rows[static_cast<std::size_t>(k)];
    if (in.empty()) continue;
    const auto wk = w.middleRows(k * c_in, c_in);
    if (k == rules.identity_offset) {
      y.noalias() += f * wk;
      continue;
    }
    const auto& out = rules.out_rows[static_cast<std::size_t>(k)];
    const auto m = static_cast<Eigen::Index>(in.size());
    gathered.resize(m, c_in);
    for (Eigen::Index j = 0; j < m; ++j) gathered.row(j) = f.row(in[static_cast<std::size_t>(j)]);
    partial.noalias() = gathered * wk;
    for (Eigen::Index j = 0; j < m; ++j) y.row(out[static_cast<std::size_t>(j)]) += partial.row(j);
  }

  NodePtr<T> fn = features.node(), wn = weights.node();
  auto rb = rulebook;
  return make_op<T>("sparse_conv", std::move(y), {features, weights}, [fn, wn, rb, c_in, c_out](Node<T>& self) {
    const Matrix<T>& g = self.grad;
    const Matrix<T>& f = fn->value;
    const Matrix<T>& w = wn->value;
    Matrix<T> df, dw;
    if (fn->requires_grad) df = Matrix<T>::Zero(f.rows(), c_in);
    if (wn->requires_grad) dw = Matrix<T>::Zero(w.rows(), c_out);
    Matrix<T> gathered, gout, partial;
    for (int k = 0; k < rb->kernel_volume; ++k) {
      const auto& in = rb->in_rows[static_cast<std::size_t>(k)];
      if (in.empty()) continue;
      const auto wk = w.middleRows(k * c_in, c_in);
      if (k == rb->identity_offset) {
        if (fn->requires_grad) df.noalias() += g * wk.transpose();
        if (wn->requires_grad) dw.middleRows(k * c_in, c_in).noalias() += f.transpose() * g;
        continue;
      }
      const auto& out = rb->out_rows[static_cast<std::size_t>(k)];
      const auto m = static_cast<Eigen::Index>(in.size());
      gout.resize(m, c_out);
      for (Eigen::Index j = 0; j < m; ++j) gout.row(j) = g.row(out[static_cast<std::size_t>(j)]);
      if (fn->requires_grad) {
        partial.noalias() = gout * wk.transpose();
        for (Eigen::Index j = 0; j < m; ++j) df.row(in[static_cast<std::size_t>(j)]) += partial.row(j);
      }
      if (wn->requires_grad) {
        gathered.resize(m, c_in);
        for (Eigen::Index j = 0; j < m; ++j) gathered.row(j) = f.row(in[static_cast<std::size_t>(j)]);
        dw.middleRows(k * c_in, c_in).noalias() += gathered.transpose() * gout;
      }
    }
    if (fn->requires_grad) fn->accumulate(df);
    if (wn->requires_grad) wn->accumulate(dw);
  });
}

#define VOXCLICK_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);         \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);        \
  template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                     \
  template Tensor<T> concat_cols(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                      \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int32_t>);                \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> rowwise_max(const Tensor<T>&, std::span<const std::int32_t>);                \
  template Tensor<T> sparse_conv(const Tensor<T>&, const std::shared_ptr<const Rulebook>&, const Tensor<T>&);

VOXCLICK_INSTANTIATE_OPS(float)
VOXCLICK_INSTANTIATE_OPS(double)

}  // namespace voxclick::diff
