#include "sigpointer/splicegen/splice.hpp"

#include <algorithm>
#include <cmath>

#include "sigpointer/errors.hpp"

namespace sigpointer::splicegen {

using features::Waveform;

namespace {

bool crosses(float a, float b) { return (a < 0.0f) != (b < 0.0f); }

// First index i >= from with a sign change between i-1 and i, or `fallback`.
std::size_t next_crossing(const std::vector<float>& x, std::size_t from, std::size_t fallback) {
  for (std::size_t i = std::max<std::size_t>(from, 1); i < x.size(); ++i)
    if (crosses(x[i - 1], x[i])) return i;
  return fallback;
}

}  // namespace

Waveform extract_segment(const SegmentSource& source, std::size_t length, bool snap, int sample_rate) {
  if (length == 0) throw InputError("segment length must be positive");
  // Spare material so snapped cuts never run off the end.
  const std::size_t spare = sample_rate / 5;
  const double seconds = std::max(0.5, static_cast<double>(length + spare) / sample_rate);
  Waveform raw = synth_utterance(source.speaker, source.utterance_seed, seconds, sample_rate);
  apply_environment(raw, Environment::from_id(source.env_id, source.loud_background),
                    num::derive_seed(source.utterance_seed, {source.env_id, 0x6e6fULL}));

  std::size_t begin = 0, end = length;
  if (snap) {
    begin = next_crossing(raw.samples, 1, 0);
    if (begin + length > raw.samples.size()) begin = 0;
    end = next_crossing(raw.samples, begin + length, begin + length);
  }
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(raw.samples.begin() + begin, raw.samples.begin() + end);
  return out;
}

SpliceLabels labels_from_junctions(std::span<const std::size_t> junctions, std::size_t block_samples) {
  SpliceLabels labels;
  for (auto j : junctions) labels.push_back(j / block_samples);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

SpliceResult splice(std::span<const Waveform> segments, const SpliceOptions& options) {
  if (segments.empty()) throw InputError("splice needs at least one segment");
  SpliceResult result;
  const int sr = segments.front().sample_rate;
  result.audio.sample_rate = sr;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].sample_rate != sr) throw InputError("segments have different sample rates");
    if (i > 0) result.junctions.push_back(result.audio.samples.size());
    result.audio.samples.insert(result.audio.samples.end(), segments[i].samples.begin(), segments[i].samples.end());
  }
  const double duration = result.audio.duration();
  if (duration + 1e-9 < options.min_seconds || duration - 1e-9 > options.max_seconds) {
    throw InputError("spliced duration " + std::to_string(duration) + " s is outside [" +
                     std::to_string(options.min_seconds) + ", " + std::to_string(options.max_seconds) + "] s");
  }
  const auto block = static_cast<std::size_t>(std::lround(options.block_seconds * sr));
  result.labels = labels_from_junctions(result.junctions, block);
  return result;
}

std::vector<double> sample_boundaries(std::size_t n, double usable, double min_segment, num::Rng& rng) {
  const double slack = usable - static_cast<double>(n + 1) * min_segment;
  if (slack < 0.0) throw InputError("duration too short for the requested number of splices");
  std::vector<double> u(n);
  for (auto& v : u) v = rng.uniform(0.0, slack);
  std::sort(u.begin(), u.end());
  for (std::size_t i = 0; i < n; ++i) u[i] += static_cast<double>(i + 1) * min_segment;
  return u;
}

}  // namespace sigpointer::splicegen
