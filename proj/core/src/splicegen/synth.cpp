#include "sigpointer/splicegen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sigpointer/errors.hpp"

namespace sigpointer::splicegen {

using features::Waveform;
constexpr double kPi = std::numbers::pi;

void SyntheticSpeaker::validate() const {
  if (pitch_base < 80.0 || pitch_base > 300.0) throw InputError("speaker pitch_base must lie in [80, 300] Hz");
  if (pitch_range < 0.0) throw InputError("speaker pitch_range must be non-negative");
}

SyntheticSpeaker SyntheticSpeaker::random(num::Rng& rng) {
  SyntheticSpeaker s;
  s.pitch_base = rng.uniform(80.0, 300.0);
  s.pitch_range = rng.uniform(0.1, 0.35) * s.pitch_base;
  s.formants = {rng.uniform(300.0, 850.0), rng.uniform(900.0, 2300.0), rng.uniform(2400.0, 3600.0)};
  s.timbre_seed = rng.bits();
  return s;
}

Biquad Biquad::bandpass(double f0, double q, int sr) {
  const double w = 2 * kPi * f0 / sr, alpha = std::sin(w) / (2 * q), a0 = 1 + alpha;
  Biquad b;
  b.b0_ = alpha / a0;
  b.b1_ = 0;
  b.b2_ = -alpha / a0;
  b.a1_ = -2 * std::cos(w) / a0;
  b.a2_ = (1 - alpha) / a0;
  return b;
}

Biquad Biquad::peaking(double f0, double q, double gain_db, int sr) {
  const double a = std::pow(10.0, gain_db / 40.0), w = 2 * kPi * f0 / sr, alpha = std::sin(w) / (2 * q);
  const double a0 = 1 + alpha / a;
  Biquad b;
  b.b0_ = (1 + alpha * a) / a0;
  b.b1_ = -2 * std::cos(w) / a0;
  b.b2_ = (1 - alpha * a) / a0;
  b.a1_ = -2 * std::cos(w) / a0;
  b.a2_ = (1 - alpha / a) / a0;
  return b;
}

Biquad Biquad::high_shelf(double f0, double gain_db, int sr) {
  const double a = std::pow(10.0, gain_db / 40.0), w = 2 * kPi * f0 / sr;
  const double cw = std::cos(w), alpha = std::sin(w) / 2 * std::sqrt(2.0), sa = 2 * std::sqrt(a) * alpha;
  const double a0 = (a + 1) - (a - 1) * cw + sa;
  Biquad b;
  b.b0_ = a * ((a + 1) + (a - 1) * cw + sa) / a0;
  b.b1_ = -2 * a * ((a - 1) + (a + 1) * cw) / a0;
  b.b2_ = a * ((a + 1) + (a - 1) * cw - sa) / a0;
  b.a1_ = 2 * ((a - 1) - (a + 1) * cw) / a0;
  b.a2_ = ((a + 1) - (a - 1) * cw - sa) / a0;
  return b;
}

double Biquad::operator()(double x) {
  const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = x;
  y2_ = y1_;
  y1_ = y;
  return y;
}

void Biquad::retune(const Biquad& other) {
  b0_ = other.b0_;
  b1_ = other.b1_;
  b2_ = other.b2_;
  a1_ = other.a1_;
  a2_ = other.a2_;
}

void peak_normalize(Waveform& w, double peak) {
  float m = 0.0f;
  for (float s : w.samples) m = std::max(m, std::abs(s));
  if (m <= 0.0f) return;
  const double g = peak / m;
  for (auto& s : w.samples) s = static_cast<float>(s * g);
}

namespace {

struct Syllable {
  std::size_t begin, end;  // voiced span
  double pitch_start, pitch_end, amplitude;
  std::array<double, 3> formants;
};

}  // namespace

Waveform synth_utterance(const SyntheticSpeaker& speaker, std::uint64_t seed, double duration, int sample_rate) {
  speaker.validate();
  if (duration < 0.5) throw InputError("utterance duration must be at least 0.5 s");
  const auto n = static_cast<std::size_t>(std::lround(duration * sample_rate));
  const double sr = sample_rate;

  num::Rng timbre(speaker.timbre_seed);
  const double tilt = timbre.uniform(0.55, 0.9);
  const std::array<double, 3> bandwidth{timbre.uniform(60, 110), timbre.uniform(80, 140), timbre.uniform(120, 200)};
  const std::array<double, 3> formant_gain{1.0, timbre.uniform(0.4, 0.8), timbre.uniform(0.15, 0.4)};
  const double aspiration = timbre.uniform(0.02, 0.08);
  const double breath = timbre.uniform(0.002, 0.006);

  num::Rng rng(num::derive_seed(speaker.timbre_seed, {seed}));
  std::vector<Syllable> syllables;
  std::size_t t = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * sr);
  double pitch = speaker.pitch_base + speaker.pitch_range * rng.uniform(-1.0, 1.0);
  while (t < n) {
    Syllable s;
    s.begin = t;
    s.end = std::min(n, t + static_cast<std::size_t>(rng.uniform(0.12, 0.35) * sr));
    s.pitch_start = pitch;
    pitch = std::clamp(pitch + speaker.pitch_range * rng.uniform(-0.6, 0.6), speaker.pitch_base - speaker.pitch_range,
                       speaker.pitch_base + speaker.pitch_range);
    s.pitch_end = pitch;
    s.amplitude = rng.uniform(0.5, 1.0);
    for (int i = 0; i < 3; ++i) s.formants[i] = speaker.formants[i] * rng.uniform(0.8, 1.2);
    syllables.push_back(s);
    const double gap = rng.uniform() < 0.3 ? rng.uniform(0.08, 0.35) : rng.uniform(0.01, 0.04);
    t = s.end + static_cast<std::size_t>(gap * sr);
  }

  std::array<Biquad, 3> resonators;
  auto tune = [&](const std::array<double, 3>& f) {
    for (int i = 0; i < 3; ++i) resonators[i].retune(Biquad::bandpass(f[i], f[i] / bandwidth[i], sample_rate));
  };
  tune(speaker.formants);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(n, 0.0f);
  double phase = 0.0, tilted = 0.0;
  const double vibrato_rate = rng.uniform(4.0, 6.5), vibrato_phase = rng.uniform(0.0, 2 * kPi);
  std::size_t next = 0;
  const Syllable* current = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < syllables.size() && i == syllables[next].begin) {
      current = &syllables[next++];
      tune(current->formants);
    }
    double voiced = 0.0;
    if (current && i < current->end) {
      const double len = static_cast<double>(current->end - current->begin);
      const double pos = (i - current->begin) / len;
      const double f0 = current->pitch_start + (current->pitch_end - current->pitch_start) * pos;
      const double vib = 1.0 + 0.01 * std::sin(2 * kPi * vibrato_rate * i / sr + vibrato_phase);
      phase += f0 * vib / sr;
      phase -= std::floor(phase);
      tilted = (1 - tilt) * (2 * phase - 1) + tilt * tilted;
      const double attack = std::min(1.0, (i - current->begin) / (0.02 * sr));
      const double release = std::min(1.0, (current->end - i) / (0.04 * sr));
      const double env = current->amplitude * std::sin(0.5 * kPi * attack) * std::sin(0.5 * kPi * release);
      voiced = env * (tilted + aspiration * rng.normal());
    }
    const double excitation = voiced + breath * rng.normal();
    double out = 0.0;
    for (int k = 0; k < 3; ++k) out += formant_gain[k] * resonators[k](excitation);
    w.samples[i] = static_cast<float>(out + 0.1 * breath * rng.normal());
  }
  peak_normalize(w, 0.9);
  return w;
}

Environment Environment::from_id(std::uint64_t env_id, bool loud_background) {
  num::Rng rng(num::derive_seed(0x656e76ULL, {env_id}));
  Environment e;
  e.gain_db = rng.uniform(-8.0, 0.0);
  e.shelf_db = rng.uniform(-12.0, 6.0);
  e.peak_hz = std::exp(rng.uniform(std::log(300.0), std::log(4000.0)));
  e.peak_db = rng.uniform(-10.0, 10.0);
  e.peak_q = rng.uniform(0.7, 3.0);
  e.echo_ms = rng.uniform(3.0, 30.0);
  e.echo_gain = rng.uniform(0.0, 0.4);
  e.noise_dbfs = rng.uniform(-70.0, -42.0);
  if (loud_background) e.noise_dbfs = rng.uniform(-40.0, -20.0);
  return e;
}

void apply_environment(Waveform& w, const Environment& env, std::uint64_t noise_seed) {
  const int sr = w.sample_rate;
  auto peak = Biquad::peaking(env.peak_hz, env.peak_q, env.peak_db, sr);
  auto shelf = Biquad::high_shelf(2000.0, env.shelf_db, sr);
  const auto delay = static_cast<std::size_t>(env.echo_ms * 1e-3 * sr);
  const double gain = std::pow(10.0, env.gain_db / 20.0);
  const double noise = std::pow(10.0, env.noise_dbfs / 20.0);
  num::Rng rng(noise_seed);

  std::vector<double> dry(w.samples.size());
  for (std::size_t i = 0; i < dry.size(); ++i) dry[i] = shelf(peak(w.samples[i] + noise * rng.normal()));
  for (std::size_t i = 0; i < dry.size(); ++i) {
    double y = dry[i];
    if (delay > 0 && i >= delay) y += env.echo_gain * dry[i - delay];
    w.samples[i] = static_cast<float>(std::clamp(gain * y, -1.0, 1.0));
  }
}

}  // namespace sigpointer::splicegen
