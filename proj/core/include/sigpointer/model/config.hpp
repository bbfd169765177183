#pragma once

#include <cstddef>
#include <string>

namespace sigpointer::model {

enum class ModelKind { sigpointer, encoder_baseline };
enum class Activation { relu, gelu };
/// Where the end-of-decoding slot sits in the pointer distribution.
enum class EosPosition { after_frames, before_frames };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& text);
std::string to_string(Activation act);
Activation activation_from_string(const std::string& text);
std::string to_string(EosPosition pos);
EosPosition eos_position_from_string(const std::string& text);

struct ModelConfig {
  ModelKind kind = ModelKind::sigpointer;
  std::size_t encoder_layers = 7;
  std::size_t decoder_layers = 1;
  std::size_t heads = 9;
  std::size_t ff_width = 128;
  double dropout = 0.1;
  std::size_t latent = 279;
  std::size_t max_frames = 90;
  std::size_t max_decode_steps = 6;
  Activation activation = Activation::relu;
  EosPosition eos_position = EosPosition::after_frames;
  /// Drop the parts of the last decoder layer that cannot influence the
  /// pointer logits (cross-attention value/output projections, feed-forward,
  /// trailing norms). Off keeps the complete reference layer layout.
  bool prune_pointer_tail = false;

  /// Throws InputError when the configuration cannot be instantiated.
  void validate() const;

  /// (n_e, n_d, h, f_d, d) = (7, 1, 9, 128, 0.1), l = 279.
  static ModelConfig sigpointer_star();
  /// Encoder-only per-frame classifier: (n_e, h, f_d, d) = (12, 9, 2048, 0.1).
  static ModelConfig transformer_encoder_baseline();

  bool operator==(const ModelConfig&) const = default;
};

/// Number of trainable scalars a model built from `config` holds.
std::size_t count_parameters(const ModelConfig& config);

}  // namespace sigpointer::model
