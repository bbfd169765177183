#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigpointer/features/features.hpp"
#include "sigpointer/splicegen/postproc.hpp"
#include "sigpointer/splicegen/splice.hpp"

namespace sigpointer::splicegen {

/// standard: the three curriculum stages. toy_easy: short clips, hard cuts
/// between distinct environments, no post-processing. toy_hard: toy_easy
/// with zero-crossing cuts and stage-2 post-processing.
enum class Variant { standard, toy_easy, toy_hard };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& text);

struct StageRules {
  std::size_t min_splices = 0;
  std::size_t max_splices = 1;
  bool postprocess = false;
  bool snap = true;
  bool distinct_environments = false;
  bool loud_background = false;
  bool distinct_speakers = false;
  /// Junctions fall in the central half of a feature block.
  bool mid_block_cuts = false;
};

StageRules stage_rules(int stage, Variant variant = Variant::standard);

struct DatasetConfig {
  int stage = 1;
  std::size_t n_samples = 100;
  std::uint64_t seed = 1;
  Variant variant = Variant::standard;
  double min_seconds = 3.0;
  double max_seconds = 45.0;
  double min_segment_seconds = 0.5;
  // post-processing draws (used when the stage rules enable it)
  bool add_noise = true;
  double snr_min_db = 5.0;
  double snr_max_db = 40.0;
  NoiseType noise_type = NoiseType::gaussian;
  std::vector<Codec> codecs{Codec::proxy_amr, Codec::proxy_mp3};
  double strength_min = 0.0;
  double strength_max = 1.0;
  int codec_runs = 1;
  std::string external_command;
  std::size_t environments = 8;
  bool write_audio = false;
  features::FeatureConfig features;

  void validate() const;
  /// Toy preset: 3-10 s clips, n in [0, 2], segments of at least 1 s.
  static DatasetConfig toy(Variant variant, std::size_t n_samples, std::uint64_t seed);
};

struct ManifestEntry {
  std::string id;
  int stage = 1;
  std::string variant = "standard";
  std::size_t n_frames = 0;
  double duration_s = 0.0;
  std::size_t n_splices = 0;
  SpliceLabels labels;
  std::optional<double> snr_db;
  std::string noise = "none";
  std::string codec = "none";
  double codec_strength = 0.0;
  int codec_runs = 1;
  std::string feature_file;
  std::string audio_file;

  /// Condition label used for robustness breakdowns.
  std::string condition() const;
  nlohmann::ordered_json to_json() const;
  static ManifestEntry from_json(const nlohmann::json& j);
};

struct GeneratedSample {
  ManifestEntry entry;
  features::Waveform audio;
  features::FrameSequence features;
};

/// Deterministic in (config, index).
GeneratedSample generate_sample(const DatasetConfig& config, std::size_t index);

struct DatasetSummary {
  std::size_t samples = 0;
  std::vector<std::size_t> splice_histogram;  // index = splice count
  std::filesystem::path manifest;
};

/// Writes manifest.jsonl, dataset.json, features/<id>.sgpt (and audio/<id>.wav).
DatasetSummary build_stage_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

struct Dataset {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  std::vector<features::FrameSequence> features;  // raw (not normalised)

  std::size_t size() const { return entries.size(); }
};

/// Generates a dataset in memory (no files), same samples as build_stage_dataset.
Dataset generate_dataset(const DatasetConfig& config);

/// Loads a generated dataset directory and checks manifest/feature agreement.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace sigpointer::splicegen
