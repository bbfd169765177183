#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sigpointer/numcore/random.hpp"
#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::num {

// All ops treat a tensor of rank >= 2 as a [rows x cols] matrix over its last
// axis unless stated otherwise.

/// [m x k] @ [k x n] -> [m x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Adds a [cols] vector to every row of x.
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Elementwise product of equal shapes.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Numerically stable softmax along `axis` (negative counts from the back).
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1);

/// Normalises each row to zero mean / unit variance, then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// Inverted dropout. Identity when !training or rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Mean of a list of scalars.
template <typename T>
Tensor<T> mean_of(std::span<const Tensor<T>> scalars);

/// Rows [begin, end) of a matrix.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts);

struct AttentionOptions {
  std::size_t heads = 1;
  bool causal = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool training = false;
};

/// Scaled dot-product multi-head attention over a ragged batch.
///
/// q is [Rq x D], k and v are [Rk x D]. Sample b owns query rows
/// [q_offsets[b], q_offsets[b+1]) and key/value rows
/// [kv_offsets[b], kv_offsets[b+1]); attention never crosses samples.
/// Returns the concatenated per-head context, [Rq x D].
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::span<const std::size_t> q_offsets,
                               std::span<const std::size_t> kv_offsets,
                               const AttentionOptions& options);

/// Pre-softmax scaled attention logits averaged over heads, for a single
/// sample: q [Tq x D], k [Tk x D] -> [Tq x Tk].
template <typename T>
Tensor<T> head_mean_scores(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads);

/// Per-head pre-softmax scaled logits of one query row against k: [heads x Tk].
/// Not differentiable.
template <typename T>
Tensor<T> head_scores(std::span<const T> query, const Tensor<T>& k, std::size_t heads);

/// Mean over rows of 1 - cos(pred_r, target_r). `target` is treated as a constant.
template <typename T>
Tensor<T> cosine_distance(const Tensor<T>& pred, const Tensor<T>& target, T eps = T(1e-8));

/// Mean softmax cross-entropy of [R x C] logits against class labels.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace sigpointer::num
