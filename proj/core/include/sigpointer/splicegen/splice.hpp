#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sigpointer/features/features.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/splicegen/synth.hpp"

namespace sigpointer::splicegen {

/// Sorted, duplicate-free splice frame indices.
using SpliceLabels = std::vector<std::size_t>;

struct SegmentSource {
  SyntheticSpeaker speaker;
  std::uint64_t utterance_seed = 0;
  std::uint64_t env_id = 0;
  bool loud_background = false;
};

/// Cuts `length` samples of source material. With `snap` both cut points are
/// moved forward to the next zero crossing, so the result may run a few
/// samples longer than requested.
features::Waveform extract_segment(const SegmentSource& source, std::size_t length, bool snap,
                                   int sample_rate = 16000);

struct SpliceOptions {
  double min_seconds = 3.0;
  double max_seconds = 45.0;
  double block_seconds = 0.5;
};

struct SpliceResult {
  features::Waveform audio;
  SpliceLabels labels;
  std::vector<std::size_t> junctions;  // sample offset of every segment start but the first
};

/// Concatenates segments. Labels are the frame index of each junction, with
/// junctions in one frame merged.
SpliceResult splice(std::span<const features::Waveform> segments, const SpliceOptions& options = {});

/// floor(junction / block) per junction, deduplicated.
SpliceLabels labels_from_junctions(std::span<const std::size_t> junctions, std::size_t block_samples);

/// n boundary times in (0, usable) with every segment at least `min_segment` long, sorted.
std::vector<double> sample_boundaries(std::size_t n, double usable, double min_segment, num::Rng& rng);

}  // namespace sigpointer::splicegen
