#include "sigpointer/model/config.hpp"

#include "sigpointer/errors.hpp"

namespace sigpointer::model {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::sigpointer ? "sigpointer" : "encoder_baseline";
}

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "sigpointer") return ModelKind::sigpointer;
  if (text == "encoder_baseline") return ModelKind::encoder_baseline;
  throw InputError("unknown model kind '" + text + "'");
}

std::string to_string(Activation act) { return act == Activation::relu ? "relu" : "gelu"; }

Activation activation_from_string(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "gelu") return Activation::gelu;
  throw InputError("unknown activation '" + text + "'");
}

std::string to_string(EosPosition pos) {
  return pos == EosPosition::after_frames ? "after_frames" : "before_frames";
}

EosPosition eos_position_from_string(const std::string& text) {
  if (text == "after_frames") return EosPosition::after_frames;
  if (text == "before_frames") return EosPosition::before_frames;
  throw InputError("unknown eos position '" + text + "'");
}

void ModelConfig::validate() const {
  if (latent == 0) throw InputError("model latent size must be positive");
  if (heads == 0 || latent % heads != 0) {
    throw InputError("latent size " + std::to_string(latent) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must lie in [0, 1)");
  if (max_frames == 0) throw InputError("max_frames must be positive");
  if (ff_width == 0) throw InputError("ff_width must be positive");
  if (kind == ModelKind::sigpointer) {
    if (decoder_layers == 0) throw InputError("a pointer model needs at least one decoder layer");
    if (max_decode_steps == 0) throw InputError("max_decode_steps must be positive");
  }
}

ModelConfig ModelConfig::sigpointer_star() { return ModelConfig{}; }

ModelConfig ModelConfig::transformer_encoder_baseline() {
  ModelConfig c;
  c.kind = ModelKind::encoder_baseline;
  c.encoder_layers = 12;
  c.decoder_layers = 0;
  c.heads = 9;
  c.ff_width = 2048;
  c.dropout = 0.1;
  return c;
}

std::size_t count_parameters(const ModelConfig& c) {
  const std::size_t l = c.latent;
  const std::size_t linear_ll = l * l + l;
  const std::size_t attention = 4 * linear_ll;
  const std::size_t norm = 2 * l;
  const std::size_t feed_forward = (l * c.ff_width + c.ff_width) + (c.ff_width * l + l);
  const std::size_t encoder_layer = attention + norm + feed_forward + norm;
  std::size_t total = c.encoder_layers * encoder_layer;

  if (c.kind == ModelKind::encoder_baseline) return total + (2 * l + 2);

  total += l;  // eos token
  const std::size_t decoder_layer = attention + norm + attention + norm + feed_forward + norm;
  if (c.decoder_layers > 0) {
    total += (c.decoder_layers - 1) * decoder_layer;
    total += c.prune_pointer_tail ? attention + norm + 2 * linear_ll : decoder_layer;
  }
  return total;
}

}  // namespace sigpointer::model
