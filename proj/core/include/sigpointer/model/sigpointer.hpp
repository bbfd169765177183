#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sigpointer/model/config.hpp"
#include "sigpointer/model/transformer.hpp"

namespace sigpointer::model {

/// Encoder output for one sample: N frame rows plus the eos row.
template <typename T>
struct EncodedMemory {
  num::Tensor<T> rows;  // [(N+1) x l]
  std::size_t frames = 0;
};

struct InferenceResult {
  /// Argmax slot of every executed decode step, including a final eos slot if reached.
  std::vector<std::size_t> raw_slots;
  /// Predicted splice frame indices, sorted and deduplicated.
  std::vector<std::size_t> labels;
  bool reached_eos = false;
};

/// Pointer network over continuous frame sequences.
///
/// Frames are fed to the encoder without an input embedding, together with a
/// learnable eos row. Decoder queries are position encodings of the step
/// index only, so no predicted value ever reaches the decoder. The pointer
/// distribution of a step is softmax(mean over heads of the last decoder
/// layer's cross-attention logits).
template <typename T>
class SigPointer {
 public:
  SigPointer(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  const num::Tensor<T>& eos_token() const { return eos_; }

  /// Slot index of eos for a sequence of `frames` frames.
  std::size_t eos_slot(std::size_t frames) const;
  /// Frame index of a non-eos slot.
  std::size_t frame_of_slot(std::size_t slot) const;

  /// Encodes one [N x l] frame matrix.
  EncodedMemory<T> encode(const num::Tensor<T>& frames, const ForwardContext& ctx = {}) const;

  /// Packed encoder pass over a batch; memory rows of sample b start at offsets[b].
  num::Tensor<T> encode_batch(std::span<const num::Tensor<T>> frames, Offsets& offsets,
                              const ForwardContext& ctx) const;

  /// Decoder queries z_0..z_{count-1}.
  num::Tensor<T> decoder_queries(std::size_t count) const;

  /// Pointer distributions for decode steps 0..steps-1 of one sample: [steps x (N+1)].
  num::Tensor<T> pointer_distributions(const EncodedMemory<T>& memory, std::size_t steps,
                                       const ForwardContext& ctx = {}) const;

  /// Teacher-stepped training forward: sample b decodes steps[b] steps.
  /// Returns one [steps[b] x (N_b+1)] distribution matrix per sample.
  std::vector<num::Tensor<T>> forward_batch(std::span<const num::Tensor<T>> frames,
                                            std::span<const std::size_t> steps,
                                            const ForwardContext& ctx) const;

  /// Distribution of the newest step given `query_count` queries: [N+1].
  num::Tensor<T> pointer_step(const EncodedMemory<T>& memory, std::size_t query_count) const;
  /// Same, with queries derived from previously emitted predictions. Only
  /// their number matters.
  num::Tensor<T> pointer_step(const EncodedMemory<T>& memory,
                              std::span<const std::size_t> previous_predictions) const;

  /// Per-head pre-softmax cross-attention logits of the newest query in the
  /// last decoder layer: [heads x (N+1)].
  num::Tensor<T> head_scores(const EncodedMemory<T>& memory, std::size_t query_count) const;

  /// Greedy decoding until eos or max_decode_steps.
  InferenceResult infer(const num::Tensor<T>& frames) const;

 private:
  num::Tensor<T> pointer_logits(const num::Tensor<T>& memory_rows, std::size_t query_count,
                                const ForwardContext& ctx) const;

  ModelConfig config_;
  ParameterSet<T> params_;
  num::Tensor<T> eos_;
  std::unique_ptr<Encoder<T>> encoder_;
  std::vector<DecoderLayer<T>> decoder_;
};

/// softmax(mean over rows of a [heads x slots] logit matrix).
template <typename T>
std::vector<T> pointer_from_head_scores(const num::Tensor<T>& head_logits);

/// Raw decode slots -> sorted, deduplicated frame labels (eos slots dropped).
std::vector<std::size_t> finalize_predictions(std::span<const std::size_t> frame_indices);

/// Encoder-only per-frame classifier: memory -> 2 logits per frame.
template <typename T>
class EncoderBaseline {
 public:
  EncoderBaseline(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

  /// [N x 2] logits for one sample.
  num::Tensor<T> forward(const num::Tensor<T>& frames, const ForwardContext& ctx = {}) const;
  /// Packed logits for a batch, [sum N_b x 2].
  num::Tensor<T> forward_batch(std::span<const num::Tensor<T>> frames, const ForwardContext& ctx) const;

  /// Frames whose splice logit beats the no-splice logit.
  std::vector<std::size_t> infer(const num::Tensor<T>& frames) const;

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
  std::unique_ptr<Encoder<T>> encoder_;
  Linear<T> head_;
};

extern template class SigPointer<float>;
extern template class SigPointer<double>;
extern template class EncoderBaseline<float>;
extern template class EncoderBaseline<double>;

}  // namespace sigpointer::model
