#include "sigpointer/splicegen/dataset.hpp"

#include <cmath>
#include <fstream>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/numcore/tensor_io.hpp"
#include "sigpointer/splicegen/wav.hpp"

namespace sigpointer::splicegen {

namespace fs = std::filesystem;
using features::Waveform;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::toy_easy: return "toy-easy";
    case Variant::toy_hard: return "toy-hard";
  }
  return "standard";
}

Variant variant_from_string(const std::string& text) {
  if (text == "standard") return Variant::standard;
  if (text == "toy-easy") return Variant::toy_easy;
  if (text == "toy-hard") return Variant::toy_hard;
  throw InputError("unknown dataset variant '" + text + "'");
}

StageRules stage_rules(int stage, Variant variant) {
  if (stage < 1 || stage > 3) throw InputError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  switch (variant) {
    case Variant::toy_easy: return {0, 2, false, false, true, true, true, true};
    case Variant::toy_hard: return {0, 2, true, true, true, true, true, true};
    case Variant::standard: break;
  }
  if (stage == 1) return {0, 1, false, true, false};
  if (stage == 2) return {0, 1, true, true, false};
  return {0, 5, true, true, false};
}

void DatasetConfig::validate() const {
  stage_rules(stage, variant);
  features.validate();
  if (min_seconds < features.min_seconds || max_seconds < min_seconds)
    throw InputError("invalid duration range [" + std::to_string(min_seconds) + ", " + std::to_string(max_seconds) + "]");
  if (snr_max_db < snr_min_db) throw InputError("invalid SNR range");
  if (strength_min < 0.0 || strength_max > 1.0 || strength_max < strength_min)
    throw InputError("codec strength range must lie in [0, 1]");
  if (codec_runs < 1) throw InputError("codec_runs must be at least 1");
  if (environments < 2) throw InputError("at least two environments are needed");
  for (auto c : codecs)
    if (c == Codec::external && external_command.empty())
      throw InputError("external codec listed without a command template");
}

DatasetConfig DatasetConfig::toy(Variant variant, std::size_t n_samples, std::uint64_t seed) {
  DatasetConfig c;
  c.variant = variant;
  c.stage = variant == Variant::toy_hard ? 2 : 1;
  c.n_samples = n_samples;
  c.seed = seed;
  c.min_seconds = 3.0;
  c.max_seconds = 10.0;
  // With mid-block cuts this leaves every segment at least one whole block.
  c.min_segment_seconds = 1.0;
  return c;
}

std::string ManifestEntry::condition() const {
  PostProcSpec spec;
  spec.codec = codec_from_string(codec);
  spec.codec_runs = codec_runs;
  spec.noise_snr_db = snr_db;
  if (snr_db) spec.noise_type = noise_from_string(noise);
  return spec.tag();
}

nlohmann::ordered_json ManifestEntry::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["stage"] = stage;
  j["variant"] = variant;
  j["n_frames"] = n_frames;
  j["duration_s"] = duration_s;
  j["n_splices"] = n_splices;
  j["labels"] = labels;
  j["snr_db"] = snr_db ? nlohmann::ordered_json(*snr_db) : nlohmann::ordered_json(nullptr);
  j["noise"] = noise;
  j["codec"] = codec;
  j["codec_strength"] = codec_strength;
  j["codec_runs"] = codec_runs;
  j["feature_file"] = feature_file;
  if (!audio_file.empty()) j["audio_file"] = audio_file;
  return j;
}

ManifestEntry ManifestEntry::from_json(const nlohmann::json& j) {
  try {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.stage = j.at("stage").get<int>();
    e.variant = j.value("variant", std::string("standard"));
    e.n_frames = j.at("n_frames").get<std::size_t>();
    e.duration_s = j.value("duration_s", 0.0);
    e.labels = j.at("labels").get<SpliceLabels>();
    e.n_splices = j.value("n_splices", e.labels.size());
    if (!j.at("snr_db").is_null()) e.snr_db = j.at("snr_db").get<double>();
    e.noise = j.value("noise", std::string("none"));
    e.codec = j.at("codec").get<std::string>();
    e.codec_strength = j.at("codec_strength").get<double>();
    e.codec_runs = j.at("codec_runs").get<int>();
    e.feature_file = j.at("feature_file").get<std::string>();
    e.audio_file = j.value("audio_file", std::string());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest entry: ") + ex.what());
  }
}

GeneratedSample generate_sample(const DatasetConfig& config, std::size_t index) {
  const auto rules = stage_rules(config.stage, config.variant);
  const int sr = config.features.sample_rate;
  const std::uint64_t sample_seed = num::derive_seed(config.seed, {static_cast<std::uint64_t>(config.stage), index});
  num::Rng rng(sample_seed);

  auto speaker = SyntheticSpeaker::random(rng);
  const double duration = rng.uniform(config.min_seconds, config.max_seconds);
  const auto total = static_cast<std::size_t>(std::floor(duration * sr));
  const std::size_t n_frames = features::frame_count(total, config.features);
  const std::size_t n = static_cast<std::size_t>(
      rng.integer(static_cast<std::int64_t>(rules.min_splices), static_cast<std::int64_t>(rules.max_splices)));
  auto boundaries = sample_boundaries(n, n_frames * config.features.block_seconds, config.min_segment_seconds, rng);
  if (rules.mid_block_cuts) {
    // Distinct blocks are guaranteed by the minimum segment length.
    const double block = config.features.block_seconds;
    for (auto& b : boundaries) b = (std::floor(b / block) + rng.uniform(0.25, 0.75)) * block;
  }

  std::vector<std::size_t> starts{0};
  for (double b : boundaries) starts.push_back(static_cast<std::size_t>(std::lround(b * sr)));
  starts.push_back(total);

  std::vector<Waveform> segments;
  std::uint64_t env = static_cast<std::uint64_t>(rng.integer(0, static_cast<std::int64_t>(config.environments) - 1));
  for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
    if (s > 0) {
      if (rules.distinct_speakers) speaker = SyntheticSpeaker::random(rng);
      if (rules.distinct_environments) {
        env = (env + 1 + rng.integer(0, static_cast<std::int64_t>(config.environments) - 2)) % config.environments;
      } else {
        env = static_cast<std::uint64_t>(rng.integer(0, static_cast<std::int64_t>(config.environments) - 1));
      }
    }
    const SegmentSource source{speaker, rng.bits(), env, rules.loud_background};
    segments.push_back(extract_segment(source, starts[s + 1] - starts[s], rules.snap, sr));
  }

  SpliceOptions options;
  options.min_seconds = config.min_seconds;
  options.max_seconds = config.max_seconds + 1.0;  // snapped cuts may overrun slightly; trimmed below
  options.block_seconds = config.features.block_seconds;
  auto spliced = splice(segments, options);
  spliced.audio.samples.resize(total);

  PostProcSpec post;
  if (rules.postprocess) {
    if (config.add_noise) {
      post.noise_snr_db = rng.uniform(config.snr_min_db, config.snr_max_db);
      post.noise_type = config.noise_type;
    }
    if (!config.codecs.empty()) {
      post.codec = config.codecs[static_cast<std::size_t>(
          rng.integer(0, static_cast<std::int64_t>(config.codecs.size()) - 1))];
      post.codec_strength = rng.uniform(config.strength_min, config.strength_max);
      post.codec_runs = config.codec_runs;
      post.external_command = config.external_command;
    }
  }
  Waveform audio = apply_postprocessing(spliced.audio, post, num::derive_seed(sample_seed, {0x706fULL}));
  for (auto& s : audio.samples) s = std::clamp(s, -1.0f, 1.0f);

  GeneratedSample out;
  out.features = features::build_frame_sequence(audio, config.features);
  if (out.features.n_frames != n_frames) throw DataError("frame count drifted during generation");

  char id[32];
  std::snprintf(id, sizeof id, "s%d-%06zu", config.stage, index);
  out.features.source_id = id;
  auto& e = out.entry;
  e.id = id;
  e.stage = config.stage;
  e.variant = to_string(config.variant);
  e.n_frames = n_frames;
  e.duration_s = static_cast<double>(total) / sr;
  e.n_splices = n;
  e.labels = spliced.labels;
  e.snr_db = post.noise_snr_db;
  e.noise = post.noise_snr_db ? to_string(post.noise_type) : "none";
  e.codec = to_string(post.codec);
  e.codec_strength = post.codec_strength;
  e.codec_runs = post.codec_runs;
  e.feature_file = std::string("features/") + id + ".sgpt";
  if (config.write_audio) e.audio_file = std::string("audio/") + id + ".wav";
  out.audio = std::move(audio);
  return out;
}

DatasetSummary build_stage_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir / "features");
  if (config.write_audio) fs::create_directories(out_dir / "audio");

  DatasetSummary summary;
  summary.manifest = out_dir / "manifest.jsonl";
  summary.splice_histogram.assign(stage_rules(config.stage, config.variant).max_splices + 1, 0);
  std::ofstream manifest(summary.manifest, std::ios::binary | std::ios::trunc);
  if (!manifest) throw DataError("cannot write " + summary.manifest.string());

  for (std::size_t i = 0; i < config.n_samples; ++i) {
    const auto sample = generate_sample(config, i);
    const auto& f = sample.features;
    num::save_tensor(out_dir / sample.entry.feature_file, {f.n_frames, f.dim}, f.values);
    if (config.write_audio) write_wav(out_dir / sample.entry.audio_file, sample.audio);
    manifest << sample.entry.to_json().dump() << '\n';
    ++summary.splice_histogram[sample.entry.n_splices];
    ++summary.samples;
  }
  if (!manifest) throw DataError("failed writing " + summary.manifest.string());

  nlohmann::ordered_json meta;
  meta["format"] = 1;
  meta["stage"] = config.stage;
  meta["variant"] = to_string(config.variant);
  meta["n_samples"] = config.n_samples;
  meta["seed"] = config.seed;
  meta["min_seconds"] = config.min_seconds;
  meta["max_seconds"] = config.max_seconds;
  meta["sample_rate"] = config.features.sample_rate;
  meta["feature_split"] = {{"mel", config.features.n_mels},
                           {"mfcc", config.features.n_mfcc},
                           {"centroid", 1}};
  meta["splice_histogram"] = summary.splice_histogram;
  std::ofstream(out_dir / "dataset.json", std::ios::binary | std::ios::trunc) << meta.dump(2) << '\n';
  return summary;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    auto sample = generate_sample(config, i);
    ds.entries.push_back(std::move(sample.entry));
    ds.features.push_back(std::move(sample.features));
  }
  return ds;
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    entries.push_back(ManifestEntry::from_json(j));
  }
  return entries;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.root = dir;
  const fs::path manifest = fs::is_directory(dir) ? dir / "manifest.jsonl" : dir;
  if (!fs::is_directory(dir)) ds.root = dir.parent_path();
  ds.entries = read_manifest(manifest);
  ds.features.reserve(ds.entries.size());
  for (const auto& e : ds.entries) {
    const auto stored = num::load_tensor(ds.root / e.feature_file);
    if (stored.shape.size() != 2 || stored.shape[0] != e.n_frames) {
      throw DataError("feature file " + e.feature_file + " has shape " + num::shape_string(stored.shape) +
                      " but the manifest lists " + std::to_string(e.n_frames) + " frames");
    }
    for (auto l : e.labels)
      if (l >= e.n_frames) throw DataError("label " + std::to_string(l) + " out of range in sample " + e.id);
    features::FrameSequence seq;
    seq.n_frames = stored.shape[0];
    seq.dim = stored.shape[1];
    seq.values = stored.values;
    seq.source_id = e.id;
    ds.features.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace sigpointer::splicegen
