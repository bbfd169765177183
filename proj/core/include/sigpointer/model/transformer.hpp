#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sigpointer/model/config.hpp"
#include "sigpointer/numcore/ops.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::model {

/// Ordered, named list of trainable tensors. Names are stable and double as
/// checkpoint file names.
template <typename T>
class ParameterSet {
 public:
  explicit ParameterSet(std::uint64_t seed = 0) : seed_(seed) {}

  num::Tensor<T> glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  num::Tensor<T> constant(const std::string& name, num::Shape shape, T value);

  const std::vector<std::pair<std::string, num::Tensor<T>>>& items() const { return items_; }
  std::vector<num::Tensor<T>> tensors() const;
  const num::Tensor<T>* find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  num::Tensor<T> add(const std::string& name, num::Tensor<T> tensor);

  std::uint64_t seed_;
  std::vector<std::pair<std::string, num::Tensor<T>>> items_;
};

struct ForwardContext {
  bool training = false;
  num::Rng* rng = nullptr;
};

/// Sinusoidal position encoding row for `position` (even dims sin, odd dims cos).
template <typename T>
std::vector<T> positional_encoding(std::size_t position, std::size_t dim);

/// Rows 0..count-1 of the encoding table as a [count x dim] constant.
template <typename T>
num::Tensor<T> positional_table(std::size_t count, std::size_t dim);

template <typename T>
struct Linear {
  num::Tensor<T> weight;  // [in x out]
  num::Tensor<T> bias;    // [out]

  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out);
  num::Tensor<T> operator()(const num::Tensor<T>& x) const;
};

template <typename T>
struct LayerNorm {
  num::Tensor<T> gain;
  num::Tensor<T> bias;

  LayerNorm() = default;
  LayerNorm(ParameterSet<T>& params, const std::string& name, std::size_t dim);
  num::Tensor<T> operator()(const num::Tensor<T>& x) const;
};

/// Ragged-batch row ranges: sample b owns rows [offsets[b], offsets[b+1]).
using Offsets = std::vector<std::size_t>;

template <typename T>
struct MultiHeadAttention {
  Linear<T> query, key, value, output;
  std::size_t heads = 1;
  bool has_value_path = true;

  MultiHeadAttention() = default;
  /// With `scores_only` the value/output projections are not allocated and
  /// only pointer logits can be computed.
  MultiHeadAttention(ParameterSet<T>& params, const std::string& name, std::size_t dim,
                     std::size_t heads, bool scores_only = false);

  num::Tensor<T> operator()(const num::Tensor<T>& queries, const num::Tensor<T>& keys_values,
                            const Offsets& q_offsets, const Offsets& kv_offsets, bool causal,
                            double dropout, const ForwardContext& ctx) const;
};

template <typename T>
struct FeedForward {
  Linear<T> expand, project;
  Activation activation = Activation::relu;

  FeedForward() = default;
  FeedForward(ParameterSet<T>& params, const std::string& name, std::size_t dim, std::size_t width,
              Activation activation);
  num::Tensor<T> operator()(const num::Tensor<T>& x, double dropout, const ForwardContext& ctx) const;
};

/// Post-norm encoder layer: x = LN(x + SelfAttn(x)); x = LN(x + FF(x)).
template <typename T>
struct EncoderLayer {
  MultiHeadAttention<T> self_attention;
  LayerNorm<T> norm1;
  FeedForward<T> feed_forward;
  LayerNorm<T> norm2;
  double dropout = 0.0;

  EncoderLayer(ParameterSet<T>& params, const std::string& name, const ModelConfig& config);
  num::Tensor<T> operator()(const num::Tensor<T>& x, const Offsets& offsets,
                            const ForwardContext& ctx) const;
};

/// Stack of encoder layers over a packed ragged batch.
template <typename T>
class Encoder {
 public:
  Encoder(ParameterSet<T>& params, const ModelConfig& config);
  num::Tensor<T> operator()(num::Tensor<T> x, const Offsets& offsets, const ForwardContext& ctx) const;

 private:
  std::vector<EncoderLayer<T>> layers_;
};

/// Post-norm decoder layer (causal self-attention, cross-attention, feed-forward).
/// The pointer layer stops after the cross-attention logits.
template <typename T>
struct DecoderLayer {
  MultiHeadAttention<T> self_attention;
  LayerNorm<T> norm1;
  MultiHeadAttention<T> cross_attention;
  LayerNorm<T> norm2;
  FeedForward<T> feed_forward;
  LayerNorm<T> norm3;
  double dropout = 0.0;
  bool has_tail = true;

  DecoderLayer(ParameterSet<T>& params, const std::string& name, const ModelConfig& config,
               bool allocate_tail);

  num::Tensor<T> operator()(const num::Tensor<T>& z, const num::Tensor<T>& memory,
                            const Offsets& z_offsets, const Offsets& memory_offsets,
                            const ForwardContext& ctx) const;

  /// Runs the self-attention sub-block and returns the cross-attention query
  /// and key projections (the inputs of the pointer logits).
  std::pair<num::Tensor<T>, num::Tensor<T>> pointer_inputs(const num::Tensor<T>& z,
                                                           const num::Tensor<T>& memory,
                                                           const Offsets& z_offsets,
                                                           const ForwardContext& ctx) const;
};

}  // namespace sigpointer::model
