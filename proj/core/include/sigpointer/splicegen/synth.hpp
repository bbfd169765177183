#pragma once

#include <array>
#include <cstdint>

#include "sigpointer/features/features.hpp"
#include "sigpointer/numcore/random.hpp"

namespace sigpointer::splicegen {

struct SyntheticSpeaker {
  double pitch_base = 120.0;  // Hz, in [80, 300]
  double pitch_range = 30.0;  // Hz
  std::array<double, 3> formants{500.0, 1500.0, 2500.0};
  std::uint64_t timbre_seed = 0;

  void validate() const;
  static SyntheticSpeaker random(num::Rng& rng);
};

/// Speech-like signal: glottal sawtooth with a pitch contour, three formant
/// resonators, syllable envelopes and breathy pauses. Peak-normalised to 0.9.
features::Waveform synth_utterance(const SyntheticSpeaker& speaker, std::uint64_t seed, double duration,
                                   int sample_rate = 16000);

/// Recording-channel colouring of one simulated environment.
struct Environment {
  double gain_db = 0.0;
  double shelf_db = 0.0;  // high shelf at 2 kHz
  double peak_hz = 1000.0;
  double peak_db = 0.0;
  double peak_q = 1.0;
  double echo_ms = 0.0;
  double echo_gain = 0.0;
  double noise_dbfs = -90.0;  // RMS of the background before colouring

  /// `loud_background` raises the room noise to -40..-20 dBFS so the
  /// environment is audible in every frame, speech or pause.
  static Environment from_id(std::uint64_t env_id, bool loud_background = false);
};

/// Adds the background, then applies the environment filter chain and gain.
void apply_environment(features::Waveform& w, const Environment& env, std::uint64_t noise_seed);

/// RBJ biquad, direct form I.
class Biquad {
 public:
  static Biquad bandpass(double f0, double q, int sample_rate);
  static Biquad peaking(double f0, double q, double gain_db, int sample_rate);
  static Biquad high_shelf(double f0, double gain_db, int sample_rate);

  double operator()(double x);
  /// Swap coefficients, keep state.
  void retune(const Biquad& other);

 private:
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

void peak_normalize(features::Waveform& w, double peak);

}  // namespace sigpointer::splicegen
