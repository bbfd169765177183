#include "sigpointer/model/transformer.hpp"

#include <cmath>

#include "sigpointer/numcore/optim.hpp"

namespace sigpointer::model {

using num::Tensor;

template <typename T>
Tensor<T> ParameterSet<T>::add(const std::string& name, Tensor<T> tensor) {
  items_.emplace_back(name, tensor);
  return tensor;
}

template <typename T>
Tensor<T> ParameterSet<T>::glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
  const auto seed = num::derive_seed(seed_, {items_.size()});
  return add(name, num::glorot_init<T>({fan_in, fan_out}, seed, true));
}

template <typename T>
Tensor<T> ParameterSet<T>::constant(const std::string& name, num::Shape shape, T value) {
  return add(name, Tensor<T>::full(std::move(shape), value, true));
}

template <typename T>
std::vector<Tensor<T>> ParameterSet<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(items_.size());
  for (const auto& [name, t] : items_) out.push_back(t);
  return out;
}

template <typename T>
const Tensor<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return &t;
  return nullptr;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

template <typename T>
std::vector<T> positional_encoding(std::size_t position, std::size_t dim) {
  std::vector<T> row(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(dim);
    const double angle = static_cast<double>(position) / std::pow(10000.0, exponent);
    row[i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
  }
  return row;
}

template <typename T>
Tensor<T> positional_table(std::size_t count, std::size_t dim) {
  std::vector<T> values;
  values.reserve(count * dim);
  for (std::size_t p = 0; p < count; ++p) {
    auto row = positional_encoding<T>(p, dim);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor<T>({count, dim}, std::move(values));
}

template <typename T>
Linear<T>::Linear(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out)
    : weight(params.glorot(name + ".weight", in, out)),
      bias(params.constant(name + ".bias", {out}, T{0})) {}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  return num::add_row(num::matmul(x, weight), bias);
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterSet<T>& params, const std::string& name, std::size_t dim)
    : gain(params.constant(name + ".gain", {dim}, T{1})),
      bias(params.constant(name + ".bias", {dim}, T{0})) {}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return num::layer_norm(x, gain, bias);
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterSet<T>& params, const std::string& name,
                                          std::size_t dim, std::size_t heads_, bool scores_only)
    : query(params, name + ".query", dim, dim),
      key(params, name + ".key", dim, dim),
      heads(heads_),
      has_value_path(!scores_only) {
  if (has_value_path) {
    value = Linear<T>(params, name + ".value", dim, dim);
    output = Linear<T>(params, name + ".output", dim, dim);
  }
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& queries, const Tensor<T>& keys_values,
                                            const Offsets& q_offsets, const Offsets& kv_offsets,
                                            bool causal, double dropout,
                                            const ForwardContext& ctx) const {
  num::AttentionOptions options;
  options.heads = heads;
  options.causal = causal;
  options.dropout = dropout;
  options.rng = ctx.rng;
  options.training = ctx.training;
  auto context = num::multi_head_attention(query(queries), key(keys_values), value(keys_values),
                                           q_offsets, kv_offsets, options);
  return output(context);
}

template <typename T>
FeedForward<T>::FeedForward(ParameterSet<T>& params, const std::string& name, std::size_t dim,
                            std::size_t width, Activation activation_)
    : expand(params, name + ".expand", dim, width),
      project(params, name + ".project", width, dim),
      activation(activation_) {}

template <typename T>
Tensor<T> FeedForward<T>::operator()(const Tensor<T>& x, double dropout, const ForwardContext& ctx) const {
  auto h = expand(x);
  h = activation == Activation::relu ? num::relu(h) : num::gelu(h);
  if (ctx.training) h = num::dropout(h, dropout, *ctx.rng, true);
  return project(h);
}

template <typename T>
EncoderLayer<T>::EncoderLayer(ParameterSet<T>& params, const std::string& name, const ModelConfig& config)
    : self_attention(params, name + ".self_attention", config.latent, config.heads),
      norm1(params, name + ".norm1", config.latent),
      feed_forward(params, name + ".feed_forward", config.latent, config.ff_width, config.activation),
      norm2(params, name + ".norm2", config.latent),
      dropout(config.dropout) {}

template <typename T>
Tensor<T> EncoderLayer<T>::operator()(const Tensor<T>& x, const Offsets& offsets,
                                      const ForwardContext& ctx) const {
  auto residual = [&](const Tensor<T>& base, Tensor<T> update) {
    if (ctx.training) update = num::dropout(update, dropout, *ctx.rng, true);
    return num::add(base, update);
  };
  auto h = norm1(residual(x, self_attention(x, x, offsets, offsets, false, dropout, ctx)));
  return norm2(residual(h, feed_forward(h, dropout, ctx)));
}

template <typename T>
Encoder<T>::Encoder(ParameterSet<T>& params, const ModelConfig& config) {
  layers_.reserve(config.encoder_layers);
  for (std::size_t i = 0; i < config.encoder_layers; ++i)
    layers_.emplace_back(params, "encoder." + std::to_string(i), config);
}

template <typename T>
Tensor<T> Encoder<T>::operator()(Tensor<T> x, const Offsets& offsets, const ForwardContext& ctx) const {
  for (const auto& layer : layers_) x = layer(x, offsets, ctx);
  return x;
}

template <typename T>
DecoderLayer<T>::DecoderLayer(ParameterSet<T>& params, const std::string& name,
                              const ModelConfig& config, bool allocate_tail)
    : self_attention(params, name + ".self_attention", config.latent, config.heads),
      norm1(params, name + ".norm1", config.latent),
      cross_attention(params, name + ".cross_attention", config.latent, config.heads, !allocate_tail),
      dropout(config.dropout),
      has_tail(allocate_tail) {
  if (has_tail) {
    norm2 = LayerNorm<T>(params, name + ".norm2", config.latent);
    feed_forward = FeedForward<T>(params, name + ".feed_forward", config.latent, config.ff_width,
                                  config.activation);
    norm3 = LayerNorm<T>(params, name + ".norm3", config.latent);
  }
}

template <typename T>
Tensor<T> DecoderLayer<T>::operator()(const Tensor<T>& z, const Tensor<T>& memory,
                                      const Offsets& z_offsets, const Offsets& memory_offsets,
                                      const ForwardContext& ctx) const {
  auto residual = [&](const Tensor<T>& base, Tensor<T> update) {
    if (ctx.training) update = num::dropout(update, dropout, *ctx.rng, true);
    return num::add(base, update);
  };
  auto h = norm1(residual(z, self_attention(z, z, z_offsets, z_offsets, true, dropout, ctx)));
  h = norm2(residual(h, cross_attention(h, memory, z_offsets, memory_offsets, false, dropout, ctx)));
  return norm3(residual(h, feed_forward(h, dropout, ctx)));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> DecoderLayer<T>::pointer_inputs(const Tensor<T>& z,
                                                                const Tensor<T>& memory,
                                                                const Offsets& z_offsets,
                                                                const ForwardContext& ctx) const {
  auto update = self_attention(z, z, z_offsets, z_offsets, true, dropout, ctx);
  if (ctx.training) update = num::dropout(update, dropout, *ctx.rng, true);
  auto h = norm1(num::add(z, update));
  return {cross_attention.query(h), cross_attention.key(memory)};
}

#define SIGPOINTER_INSTANTIATE_LAYERS(T)                                  \
  template class ParameterSet<T>;                                         \
  template std::vector<T> positional_encoding<T>(std::size_t, std::size_t); \
  template Tensor<T> positional_table<T>(std::size_t, std::size_t);       \
  template struct Linear<T>;                                              \
  template struct LayerNorm<T>;                                           \
  template struct MultiHeadAttention<T>;                                  \
  template struct FeedForward<T>;                                         \
  template struct EncoderLayer<T>;                                        \
  template class Encoder<T>;                                              \
  template struct DecoderLayer<T>;

SIGPOINTER_INSTANTIATE_LAYERS(float)
SIGPOINTER_INSTANTIATE_LAYERS(double)

#undef SIGPOINTER_INSTANTIATE_LAYERS

}  // namespace sigpointer::model
