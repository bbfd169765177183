#include "sigpointer/model/sigpointer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sigpointer/errors.hpp"

namespace sigpointer::model {

using num::Tensor;

namespace {

template <typename T>
void append_positions(std::vector<T>& out, std::size_t count, std::size_t dim) {
  for (std::size_t p = 0; p < count; ++p) {
    auto row = positional_encoding<T>(p, dim);
    out.insert(out.end(), row.begin(), row.end());
  }
}

template <typename T>
void check_frames(const Tensor<T>& frames, const ModelConfig& config) {
  if (!frames.defined() || frames.rank() != 2 || frames.cols() != config.latent) {
    throw DimensionError("expected an [N x " + std::to_string(config.latent) + "] frame matrix, got " +
                         (frames.defined() ? num::shape_string(frames.shape()) : std::string("nothing")));
  }
  const std::size_t n = frames.dim(0);
  if (n == 0) throw InputError("frame sequence is empty");
  if (n > config.max_frames) {
    throw InputError("sequence of " + std::to_string(n) + " frames exceeds the model maximum of " +
                     std::to_string(config.max_frames) +
                     "; cut the input into segments that fit the training length range");
  }
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace

std::vector<std::size_t> finalize_predictions(std::span<const std::size_t> frame_indices) {
  std::vector<std::size_t> out(frame_indices.begin(), frame_indices.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <typename T>
std::vector<T> pointer_from_head_scores(const Tensor<T>& head_logits) {
  const std::size_t heads = head_logits.rows(), slots = head_logits.cols();
  std::vector<T> mean(slots, T{0});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t s = 0; s < slots; ++s) mean[s] += head_logits.at(h, s);
  for (auto& m : mean) m /= T(heads);
  auto probs = num::softmax(Tensor<T>({slots}, std::move(mean)));
  return {probs.data().begin(), probs.data().end()};
}

template <typename T>
SigPointer<T>::SigPointer(ModelConfig config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  if (config_.kind != ModelKind::sigpointer) throw InputError("SigPointer needs a sigpointer config");
  eos_ = params_.glorot("eos_token", 1, config_.latent);
  encoder_ = std::make_unique<Encoder<T>>(params_, config_);
  decoder_.reserve(config_.decoder_layers);
  for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
    const bool last = i + 1 == config_.decoder_layers;
    decoder_.emplace_back(params_, "decoder." + std::to_string(i), config_,
                          !(last && config_.prune_pointer_tail));
  }
}

template <typename T>
std::size_t SigPointer<T>::eos_slot(std::size_t frames) const {
  return config_.eos_position == EosPosition::after_frames ? frames : 0;
}

template <typename T>
std::size_t SigPointer<T>::frame_of_slot(std::size_t slot) const {
  return config_.eos_position == EosPosition::after_frames ? slot : slot - 1;
}

template <typename T>
Tensor<T> SigPointer<T>::encode_batch(std::span<const Tensor<T>> frames, Offsets& offsets,
                                      const ForwardContext& ctx) const {
  std::vector<Tensor<T>> parts;
  parts.reserve(2 * frames.size());
  std::vector<T> positions;
  offsets.assign(1, 0);
  for (const auto& f : frames) {
    check_frames(f, config_);
    const std::size_t n = f.dim(0);
    if (config_.eos_position == EosPosition::after_frames) {
      parts.push_back(f);
      parts.push_back(eos_);
    } else {
      parts.push_back(eos_);
      parts.push_back(f);
    }
    append_positions(positions, n + 1, config_.latent);
    offsets.push_back(offsets.back() + n + 1);
  }
  auto x = num::concat_rows<T>(parts);
  x = num::add(x, Tensor<T>(x.shape(), std::move(positions)));
  return (*encoder_)(x, offsets, ctx);
}

template <typename T>
EncodedMemory<T> SigPointer<T>::encode(const Tensor<T>& frames, const ForwardContext& ctx) const {
  Offsets offsets;
  std::vector<Tensor<T>> one{frames};
  auto rows = encode_batch(one, offsets, ctx);
  return {rows, frames.dim(0)};
}

template <typename T>
Tensor<T> SigPointer<T>::decoder_queries(std::size_t count) const {
  return positional_table<T>(count, config_.latent);
}

template <typename T>
Tensor<T> SigPointer<T>::pointer_logits(const Tensor<T>& memory_rows, std::size_t query_count,
                                        const ForwardContext& ctx) const {
  if (query_count == 0) throw InputError("pointer step needs at least one decoder query");
  const Offsets z_offsets{0, query_count};
  const Offsets m_offsets{0, memory_rows.dim(0)};
  auto z = decoder_queries(query_count);
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) z = decoder_[i](z, memory_rows, z_offsets, m_offsets, ctx);
  auto [q, k] = decoder_.back().pointer_inputs(z, memory_rows, z_offsets, ctx);
  return num::head_mean_scores(q, k, config_.heads);
}

template <typename T>
Tensor<T> SigPointer<T>::pointer_distributions(const EncodedMemory<T>& memory, std::size_t steps,
                                               const ForwardContext& ctx) const {
  return num::softmax(pointer_logits(memory.rows, steps, ctx));
}

template <typename T>
std::vector<Tensor<T>> SigPointer<T>::forward_batch(std::span<const Tensor<T>> frames,
                                                    std::span<const std::size_t> steps,
                                                    const ForwardContext& ctx) const {
  if (steps.size() != frames.size()) throw DimensionError("forward_batch: one step count per sample");
  Offsets m_offsets;
  auto memory = encode_batch(frames, m_offsets, ctx);

  Offsets z_offsets{0};
  std::vector<T> queries;
  for (std::size_t s : steps) {
    if (s == 0) throw InputError("forward_batch: every sample decodes at least one step");
    append_positions(queries, s, config_.latent);
    z_offsets.push_back(z_offsets.back() + s);
  }
  Tensor<T> z({z_offsets.back(), config_.latent}, std::move(queries));
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) z = decoder_[i](z, memory, z_offsets, m_offsets, ctx);
  auto [q, k] = decoder_.back().pointer_inputs(z, memory, z_offsets, ctx);

  std::vector<Tensor<T>> out;
  out.reserve(frames.size());
  for (std::size_t b = 0; b < frames.size(); ++b) {
    auto qb = num::slice_rows(q, z_offsets[b], z_offsets[b + 1]);
    auto kb = num::slice_rows(k, m_offsets[b], m_offsets[b + 1]);
    out.push_back(num::softmax(num::head_mean_scores(qb, kb, config_.heads)));
  }
  return out;
}

template <typename T>
Tensor<T> SigPointer<T>::pointer_step(const EncodedMemory<T>& memory, std::size_t query_count) const {
  auto logits = pointer_logits(memory.rows, query_count, {});
  const std::size_t slots = logits.cols();
  auto last = num::slice_rows(logits, query_count - 1, query_count);
  return num::softmax(Tensor<T>({slots}, std::vector<T>(last.data().begin(), last.data().end())));
}

template <typename T>
Tensor<T> SigPointer<T>::pointer_step(const EncodedMemory<T>& memory,
                                      std::span<const std::size_t> previous_predictions) const {
  return pointer_step(memory, previous_predictions.size() + 1);
}

template <typename T>
Tensor<T> SigPointer<T>::head_scores(const EncodedMemory<T>& memory, std::size_t query_count) const {
  num::NoGradGuard no_grad;
  const Offsets z_offsets{0, query_count};
  const Offsets m_offsets{0, memory.rows.dim(0)};
  auto z = decoder_queries(query_count);
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) z = decoder_[i](z, memory.rows, z_offsets, m_offsets, {});
  auto [q, k] = decoder_.back().pointer_inputs(z, memory.rows, z_offsets, {});
  const std::size_t d = config_.latent;
  return num::head_scores<T>(q.data().subspan((query_count - 1) * d, d), k, config_.heads);
}

template <typename T>
InferenceResult SigPointer<T>::infer(const Tensor<T>& frames) const {
  num::NoGradGuard no_grad;
  const auto memory = encode(frames);
  const std::size_t eos = eos_slot(memory.frames);
  InferenceResult result;
  std::vector<std::size_t> found;
  for (std::size_t step = 0; step < config_.max_decode_steps; ++step) {
    const auto p = pointer_step(memory, step + 1);
    const std::size_t slot = argmax(p.data());
    result.raw_slots.push_back(slot);
    if (slot == eos) {
      result.reached_eos = true;
      break;
    }
    found.push_back(frame_of_slot(slot));
  }
  result.labels = finalize_predictions(found);
  return result;
}

template <typename T>
EncoderBaseline<T>::EncoderBaseline(ModelConfig config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  if (config_.kind != ModelKind::encoder_baseline) {
    throw InputError("EncoderBaseline needs an encoder_baseline config");
  }
  encoder_ = std::make_unique<Encoder<T>>(params_, config_);
  head_ = Linear<T>(params_, "frame_head", config_.latent, 2);
}

template <typename T>
Tensor<T> EncoderBaseline<T>::forward_batch(std::span<const Tensor<T>> frames, const ForwardContext& ctx) const {
  std::vector<T> positions;
  Offsets offsets{0};
  for (const auto& f : frames) {
    check_frames(f, config_);
    append_positions(positions, f.dim(0), config_.latent);
    offsets.push_back(offsets.back() + f.dim(0));
  }
  auto x = num::concat_rows<T>(frames);
  x = num::add(x, Tensor<T>(x.shape(), std::move(positions)));
  return head_((*encoder_)(x, offsets, ctx));
}

template <typename T>
Tensor<T> EncoderBaseline<T>::forward(const Tensor<T>& frames, const ForwardContext& ctx) const {
  std::vector<Tensor<T>> one{frames};
  return forward_batch(one, ctx);
}

template <typename T>
std::vector<std::size_t> EncoderBaseline<T>::infer(const Tensor<T>& frames) const {
  num::NoGradGuard no_grad;
  const auto logits = forward(frames);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < logits.rows(); ++i)
    if (logits.at(i, 1) > logits.at(i, 0)) out.push_back(i);
  return out;
}

template class SigPointer<float>;
template class SigPointer<double>;
template class EncoderBaseline<float>;
template class EncoderBaseline<double>;
template std::vector<float> pointer_from_head_scores(const Tensor<float>&);
template std::vector<double> pointer_from_head_scores(const Tensor<double>&);

}  // namespace sigpointer::model
