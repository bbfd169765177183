#include "sigpointer/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "sigpointer/errors.hpp"

namespace sigpointer::num {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstBlock = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutBlock = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (!x.defined() || x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " +
                         (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
NodeT<T>* parent_if_grad(NodeT<T>& node, std::size_t i) {
  NodeT<T>* p = node.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

void check_offsets(std::span<const std::size_t> offsets, std::size_t total, const char* what) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != total) {
    throw DimensionError(std::string("multi_head_attention: bad ") + what + " offsets");
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) {
      throw DimensionError(std::string("multi_head_attention: decreasing ") + what + " offsets");
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " @ " +
                         shape_string(b.shape()));
  }
  std::vector<T> out(m * n);
  MutMap<T>(out.data(), m, n).noalias() =
      ConstMap<T>(a.data().data(), m, k) * ConstMap<T>(b.data().data(), k, n);
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](NodeT<T>& self) {
    ConstMap<T> dc(self.grad.data(), m, n);
    if (auto* pa = parent_if_grad(self, 0)) {
      ConstMap<T> bm(self.parents[1]->value.data(), k, n);
      MutMap<T>(pa->ensure_grad().data(), m, k).noalias() += dc * bm.transpose();
    }
    if (auto* pb = parent_if_grad(self, 1)) {
      ConstMap<T> am(self.parents[0]->value.data(), m, k);
      MutMap<T>(pb->ensure_grad().data(), k, n).noalias() += am.transpose() * dc;
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* parent = parent_if_grad(self, p)) {
        auto g = parent->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row) {
  const std::size_t r = x.rows(), c = x.cols();
  if (row.size() != c) {
    throw DimensionError("add_row: row of size " + std::to_string(row.size()) +
                         " does not match " + shape_string(x.shape()));
  }
  std::vector<T> out(x.size());
  auto xv = x.data();
  auto rv = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + rv[j];
  return make_result<T>(x.shape(), std::move(out), {x, row}, [r, c](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (auto* pr = parent_if_grad(self, 1)) {
      auto g = pr->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return make_result<T>(x.shape(), std::move(out), {x}, [factor](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* pa = parent_if_grad(self, 0)) {
      auto g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (auto* pb = parent_if_grad(self, 1)) {
      auto g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
  return make_result<T>(x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (px->value[i] > T{0}) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  auto xv = x.data();
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  return make_result<T>(x.shape(), std::move(out), {x}, [inv_sqrt2](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = px->value[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
        g[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int rank = static_cast<int>(x.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("softmax: axis out of range");
  const auto& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  const std::size_t n = s[axis];
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total{0};
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  return make_result<T>(s, std::move(out), {x}, [outer, inner, n](NodeT<T>& self) {
    auto* px = parent_if_grad(self, 0);
    if (!px) return;
    auto g = px->ensure_grad();
    const auto& y = self.value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        T dot{0};
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          g[idx] += y[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (c == 0) throw DimensionError("layer_norm: empty feature axis");
  if (gain.size() != c || bias.size() != c) {
    throw DimensionError("layer_norm: gain/bias size does not match " + shape_string(x.shape()));
  }
  auto normed = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(r);
  std::vector<T> out(x.size());
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = xv.data() + i * c;
    T mu{0};
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= T(c);
    T var{0};
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(c);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const T nx = (row[j] - mu) * is;
      (*normed)[i * c + j] = nx;
      out[i * c + j] = nx * gv[j] + bv[j];
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x, gain, bias},
                        [r, c, normed, inv_std](NodeT<T>& self) {
    const auto& nx = *normed;
    const auto& gv = self.parents[1]->value;
    if (auto* pg = parent_if_grad(self, 1)) {
      auto g = pg->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j] * nx[i * c + j];
    }
    if (auto* pb = parent_if_grad(self, 2)) {
      auto g = pb->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        T mean_d{0}, mean_dx{0};
        for (std::size_t j = 0; j < c; ++j) {
          const T d = self.grad[i * c + j] * gv[j];
          mean_d += d;
          mean_dx += d * nx[i * c + j];
        }
        mean_d /= T(c);
        mean_dx /= T(c);
        const T is = (*inv_std)[i];
        for (std::size_t j = 0; j < c; ++j) {
          const T d = self.grad[i * c + j] * gv[j];
          g[i * c + j] += is * (d - mean_d - nx[i * c + j] * mean_dx);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw InputError("dropout: rate must be < 1");
  const T keep_scale = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.size());
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? T{0} : keep_scale;
    out[i] = xv[i] * (*mask)[i];
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [mask](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total{0};
  for (T v : x.data()) total += v;
  return make_result<T>({1}, {total}, {x}, [](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      for (auto& g : px->ensure_grad()) g += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), T(1) / T(x.size()));
}

template <typename T>
Tensor<T> mean_of(std::span<const Tensor<T>> scalars) {
  if (scalars.empty()) throw DimensionError("mean_of: no inputs");
  T total{0};
  for (const auto& s : scalars) total += s.item();
  const T inv = T(1) / T(scalars.size());
  std::vector<Tensor<T>> inputs(scalars.begin(), scalars.end());
  return make_result<T>({1}, {total * inv}, inputs, [inv](NodeT<T>& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      if (auto* parent = parent_if_grad(self, p)) parent->ensure_grad()[0] += inv * self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  const std::size_t c = x.cols();
  if (begin > end || end > x.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of " + shape_string(x.shape()));
  }
  std::vector<T> out(x.data().begin() + begin * c, x.data().begin() + end * c);
  return make_result<T>({end - begin, c}, std::move(out), {x}, [begin, c](NodeT<T>& self) {
    if (auto* px = parent_if_grad(self, 0)) {
      auto g = px->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  std::vector<T> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
  return make_result<T>({rows, c}, std::move(out), inputs, [](NodeT<T>& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t n = self.parents[p]->value.size();
      if (auto* parent = parent_if_grad(self, p)) {
        auto g = parent->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::span<const std::size_t> q_offsets,
                               std::span<const std::size_t> kv_offsets,
                               const AttentionOptions& options) {
  require_matrix(q, "multi_head_attention");
  require_matrix(k, "multi_head_attention");
  require_same_shape(k, v, "multi_head_attention");
  const std::size_t d = q.cols();
  const std::size_t heads = options.heads;
  if (k.cols() != d || heads == 0 || d % heads != 0) {
    throw DimensionError("multi_head_attention: model width must match and divide by heads");
  }
  check_offsets(q_offsets, q.dim(0), "query");
  check_offsets(kv_offsets, k.dim(0), "key");
  if (q_offsets.size() != kv_offsets.size()) {
    throw DimensionError("multi_head_attention: batch size mismatch");
  }
  const bool use_dropout = options.training && options.dropout > 0.0;
  if (use_dropout && options.rng == nullptr) throw InputError("multi_head_attention: dropout needs an rng");

  const std::size_t batch = q_offsets.size() - 1;
  const std::size_t dh = d / heads;
  const T scale_factor = T(1) / std::sqrt(T(dh));

  // Per (sample, head) probability blocks, laid out consecutively.
  std::vector<std::size_t> block_offset(batch * heads + 1, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t tq = q_offsets[b + 1] - q_offsets[b];
    const std::size_t tk = kv_offsets[b + 1] - kv_offsets[b];
    if (tq > 0 && tk == 0) throw DimensionError("multi_head_attention: sample without keys");
    for (std::size_t h = 0; h < heads; ++h)
      block_offset[b * heads + h + 1] = block_offset[b * heads + h] + tq * tk;
  }
  auto probs = std::make_shared<std::vector<T>>(block_offset.back());
  auto mask = std::make_shared<std::vector<T>>(use_dropout ? block_offset.back() : 0);
  const T keep_scale = use_dropout ? T(1.0 / (1.0 - options.dropout)) : T(1);

  std::vector<T> out(q.size(), T{0});
  const T* qp = q.data().data();
  const T* kp = k.data().data();
  const T* vp = v.data().data();
  RowMat<T> dropped;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t q0 = q_offsets[b], tq = q_offsets[b + 1] - q0;
    const std::size_t k0 = kv_offsets[b], tk = kv_offsets[b + 1] - k0;
    if (tq == 0) continue;
    for (std::size_t h = 0; h < heads; ++h) {
      ConstBlock<T> qh(qp + q0 * d + h * dh, tq, dh, Eigen::OuterStride<>(d));
      ConstBlock<T> kh(kp + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d));
      ConstBlock<T> vh(vp + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d));
      MutMap<T> p(probs->data() + block_offset[b * heads + h], tq, tk);
      p.noalias() = (qh * kh.transpose()) * scale_factor;
      for (std::size_t i = 0; i < tq; ++i) {
        const std::size_t visible = options.causal ? std::min(tk, i + 1) : tk;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, p(i, j));
        T total{0};
        for (std::size_t j = 0; j < visible; ++j) {
          p(i, j) = std::exp(p(i, j) - mx);
          total += p(i, j);
        }
        for (std::size_t j = 0; j < visible; ++j) p(i, j) /= total;
        for (std::size_t j = visible; j < tk; ++j) p(i, j) = T{0};
      }
      MutBlock<T> ctx(out.data() + q0 * d + h * dh, tq, dh, Eigen::OuterStride<>(d));
      if (use_dropout) {
        MutMap<T> m(mask->data() + block_offset[b * heads + h], tq, tk);
        for (std::size_t i = 0; i < tq; ++i)
          for (std::size_t j = 0; j < tk; ++j)
            m(i, j) = options.rng->uniform() < options.dropout ? T{0} : keep_scale;
        dropped = p.cwiseProduct(m);
        ctx.noalias() = dropped * vh;
      } else {
        ctx.noalias() = p * vh;
      }
    }
  }

  std::vector<std::size_t> qo(q_offsets.begin(), q_offsets.end());
  std::vector<std::size_t> ko(kv_offsets.begin(), kv_offsets.end());
  return make_result<T>(
      q.shape(), std::move(out), {q, k, v},
      [=, qo = std::move(qo), ko = std::move(ko),
       block_offset = std::move(block_offset)](NodeT<T>& self) {
        auto* pq = parent_if_grad(self, 0);
        auto* pk = parent_if_grad(self, 1);
        auto* pv = parent_if_grad(self, 2);
        const T* qv = self.parents[0]->value.data();
        const T* kv = self.parents[1]->value.data();
        const T* vv = self.parents[2]->value.data();
        T* gq = pq ? pq->ensure_grad().data() : nullptr;
        T* gk = pk ? pk->ensure_grad().data() : nullptr;
        T* gv = pv ? pv->ensure_grad().data() : nullptr;
        RowMat<T> pd, dp, ds;
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t q0 = qo[b], tq = qo[b + 1] - q0;
          const std::size_t k0 = ko[b], tk = ko[b + 1] - k0;
          if (tq == 0) continue;
          for (std::size_t h = 0; h < heads; ++h) {
            ConstMap<T> p(probs->data() + block_offset[b * heads + h], tq, tk);
            ConstBlock<T> dctx(self.grad.data() + q0 * d + h * dh, tq, dh, Eigen::OuterStride<>(d));
            ConstBlock<T> qh(qv + q0 * d + h * dh, tq, dh, Eigen::OuterStride<>(d));
            ConstBlock<T> kh(kv + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d));
            ConstBlock<T> vh(vv + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d));
            if (use_dropout) {
              ConstMap<T> m(mask->data() + block_offset[b * heads + h], tq, tk);
              pd = p.cwiseProduct(m);
              if (gv) {
                MutBlock<T>(gv + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d)).noalias() +=
                    pd.transpose() * dctx;
              }
              dp = (dctx * vh.transpose()).cwiseProduct(m);
            } else {
              if (gv) {
                MutBlock<T>(gv + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d)).noalias() +=
                    p.transpose() * dctx;
              }
              dp.noalias() = dctx * vh.transpose();
            }
            if (!gq && !gk) continue;
            ds.resize(tq, tk);
            for (std::size_t i = 0; i < tq; ++i) {
              T dot{0};
              for (std::size_t j = 0; j < tk; ++j) dot += dp(i, j) * p(i, j);
              for (std::size_t j = 0; j < tk; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot) * scale_factor;
            }
            if (gq) {
              MutBlock<T>(gq + q0 * d + h * dh, tq, dh, Eigen::OuterStride<>(d)).noalias() += ds * kh;
            }
            if (gk) {
              MutBlock<T>(gk + k0 * d + h * dh, tk, dh, Eigen::OuterStride<>(d)).noalias() +=
                  ds.transpose() * qh;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> head_mean_scores(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads) {
  require_matrix(q, "head_mean_scores");
  require_matrix(k, "head_mean_scores");
  const std::size_t d = q.cols();
  if (k.cols() != d || heads == 0 || d % heads != 0) {
    throw DimensionError("head_mean_scores: model width must match and divide by heads");
  }
  const std::size_t tq = q.dim(0), tk = k.dim(0), dh = d / heads;
  const T factor = T(1) / (std::sqrt(T(dh)) * T(heads));
  std::vector<T> out(tq * tk, T{0});
  MutMap<T> o(out.data(), tq, tk);
  for (std::size_t h = 0; h < heads; ++h) {
    ConstBlock<T> qh(q.data().data() + h * dh, tq, dh, Eigen::OuterStride<>(d));
    ConstBlock<T> kh(k.data().data() + h * dh, tk, dh, Eigen::OuterStride<>(d));
    o.noalias() += (qh * kh.transpose()) * factor;
  }
  return make_result<T>({tq, tk}, std::move(out), {q, k}, [=](NodeT<T>& self) {
    ConstMap<T> g(self.grad.data(), tq, tk);
    auto* pq = parent_if_grad(self, 0);
    auto* pk = parent_if_grad(self, 1);
    for (std::size_t h = 0; h < heads; ++h) {
      ConstBlock<T> qh(self.parents[0]->value.data() + h * dh, tq, dh, Eigen::OuterStride<>(d));
      ConstBlock<T> kh(self.parents[1]->value.data() + h * dh, tk, dh, Eigen::OuterStride<>(d));
      if (pq) {
        MutBlock<T>(pq->ensure_grad().data() + h * dh, tq, dh, Eigen::OuterStride<>(d)).noalias() +=
            (g * kh) * factor;
      }
      if (pk) {
        MutBlock<T>(pk->ensure_grad().data() + h * dh, tk, dh, Eigen::OuterStride<>(d)).noalias() +=
            (g.transpose() * qh) * factor;
      }
    }
  });
}

template <typename T>
Tensor<T> head_scores(std::span<const T> query, const Tensor<T>& k, std::size_t heads) {
  require_matrix(k, "head_scores");
  const std::size_t d = k.cols();
  if (query.size() != d || heads == 0 || d % heads != 0) {
    throw DimensionError("head_scores: query width must match and divide by heads");
  }
  const std::size_t tk = k.dim(0), dh = d / heads;
  const T factor = T(1) / std::sqrt(T(dh));
  std::vector<T> out(heads * tk);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t j = 0; j < tk; ++j) {
      T dot{0};
      for (std::size_t c = 0; c < dh; ++c) dot += query[h * dh + c] * k.data()[j * d + h * dh + c];
      out[h * tk + j] = dot * factor;
    }
  }
  return Tensor<T>({heads, tk}, std::move(out));
}

template <typename T>
Tensor<T> cosine_distance(const Tensor<T>& pred, const Tensor<T>& target, T eps) {
  require_same_shape(pred, target, "cosine_distance");
  const std::size_t r = pred.rows(), c = pred.cols();
  if (r == 0) throw DimensionError("cosine_distance: no rows");
  auto pv = pred.data();
  auto tv = target.data();
  auto stats = std::make_shared<std::vector<T>>(3 * r);  // dot, |p|, |t| per row
  T total{0};
  for (std::size_t i = 0; i < r; ++i) {
    T dot{0}, pp{0}, tt{0};
    for (std::size_t j = 0; j < c; ++j) {
      dot += pv[i * c + j] * tv[i * c + j];
      pp += pv[i * c + j] * pv[i * c + j];
      tt += tv[i * c + j] * tv[i * c + j];
    }
    const T np = std::sqrt(pp), nt = std::sqrt(tt);
    (*stats)[3 * i] = dot;
    (*stats)[3 * i + 1] = np;
    (*stats)[3 * i + 2] = nt;
    total += T(1) - dot / std::max(np * nt, eps);
  }
  return make_result<T>({1}, {total / T(r)}, {pred, target}, [r, c, stats, eps](NodeT<T>& self) {
    auto* pp = parent_if_grad(self, 0);
    if (!pp) return;
    auto g = pp->ensure_grad();
    const auto& pv = self.parents[0]->value;
    const auto& tv = self.parents[1]->value;
    const T upstream = self.grad[0] / T(r);
    for (std::size_t i = 0; i < r; ++i) {
      const T dot = (*stats)[3 * i], np = (*stats)[3 * i + 1], nt = (*stats)[3 * i + 2];
      const T denom = np * nt;
      if (denom <= eps) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] -= upstream * tv[i * c + j] / eps;
        continue;
      }
      for (std::size_t j = 0; j < c; ++j) {
        const T dcos = tv[i * c + j] / denom - dot * pv[i * c + j] / (np * np * denom);
        g[i * c + j] -= upstream * dcos;
      }
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (labels.size() != r) throw DimensionError("cross_entropy: label count differs from rows");
  if (r == 0) throw DimensionError("cross_entropy: no rows");
  auto probs = std::make_shared<std::vector<T>>(logits.size());
  std::vector<int> lab(labels.begin(), labels.end());
  auto lv = logits.data();
  T total{0};
  for (std::size_t i = 0; i < r; ++i) {
    if (lab[i] < 0 || static_cast<std::size_t>(lab[i]) >= c) throw InputError("cross_entropy: label out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
    T z{0};
    for (std::size_t j = 0; j < c; ++j) z += std::exp(lv[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(lv[i * c + j] - mx) / z;
    total -= lv[i * c + lab[i]] - mx - std::log(z);
  }
  return make_result<T>({1}, {total / T(r)}, {logits},
                        [r, c, probs, lab = std::move(lab)](NodeT<T>& self) {
    if (auto* pl = parent_if_grad(self, 0)) {
      auto g = pl->ensure_grad();
      const T upstream = self.grad[0] / T(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          g[i * c + j] += upstream * ((*probs)[i * c + j] - (static_cast<int>(j) == lab[i] ? T(1) : T(0)));
    }
  });
}

#define SIGPOINTER_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> gelu(const Tensor<T>&);                                                       \
  template Tensor<T> softmax(const Tensor<T>&, int);                                               \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);          \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&, bool);                                \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> mean(const Tensor<T>&);                                                       \
  template Tensor<T> mean_of(std::span<const Tensor<T>>);                                          \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                      \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                          std::span<const std::size_t>,                            \
                                          std::span<const std::size_t>, const AttentionOptions&);  \
  template Tensor<T> head_mean_scores(const Tensor<T>&, const Tensor<T>&, std::size_t);            \
  template Tensor<T> head_scores(std::span<const T>, const Tensor<T>&, std::size_t);               \
  template Tensor<T> cosine_distance(const Tensor<T>&, const Tensor<T>&, T);                       \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);

SIGPOINTER_INSTANTIATE_OPS(float)
SIGPOINTER_INSTANTIATE_OPS(double)

#undef SIGPOINTER_INSTANTIATE_OPS

}  // namespace sigpointer::num
