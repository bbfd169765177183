#include "sigpointer/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "sigpointer/errors.hpp"
#include "sigpointer/splicegen/wav.hpp"

namespace sigpointer::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string histogram_line(const std::vector<std::size_t>& h) {
  std::ostringstream os;
  for (std::size_t n = 0; n < h.size(); ++n) os << (n ? "  " : "") << n << ":" << h[n];
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::vector<splicegen::DatasetSummary> cmd_gen(const ExperimentConfig& config, int stage, std::ostream& out) {
  if (stage < 1 || stage > 3) throw UsageError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  config.validate();
  config.save(config.out_dir / "config.ini");
  std::vector<splicegen::DatasetSummary> summaries;
  for (auto split : {Split::train, Split::val, Split::test}) {
    const auto dir = config.data_dir(stage, split);
    auto summary = splicegen::build_stage_dataset(config.split_config(stage, split), dir);
    out << "stage " << stage << " " << to_string(split) << ": " << summary.samples << " samples -> " << dir.string()
        << "\n  splices " << histogram_line(summary.splice_histogram) << "\n";
    summaries.push_back(std::move(summary));
  }
  return summaries;
}

train::CurriculumResult cmd_train(const ExperimentConfig& config, std::ostream& out, bool resume) {
  config.validate();
  std::vector<train::StageData> stages;
  for (int stage : config.stages) {
    train::StageData sd;
    sd.stage = stage;
    sd.train = splicegen::load_dataset(config.data_dir(stage, Split::train));
    sd.val = splicegen::load_dataset(config.data_dir(stage, Split::val));
    if (sd.train.size() == 0 || sd.val.size() == 0) {
      throw DataError("stage " + std::to_string(stage) + " needs non-empty train and val sets");
    }
    stages.push_back(std::move(sd));
  }
  config.save(config.out_dir / "config.ini");

  model::AnyModel model(config.model, config.train.seed);
  train::CurriculumOptions options;
  options.out_dir = config.model_dir();
  options.train = config.train;
  options.resume = resume;
  options.on_epoch = [&out](const train::EpochRecord& r) {
    out << "stage " << r.stage << " epoch " << r.epoch << " loss "
        << (r.train_loss ? fixed(*r.train_loss, 5) : std::string("-")) << " val_mae " << fixed(r.val_mae, 4) << "\n"
        << std::flush;
  };
  auto result = train::run_curriculum(model, stages, options);
  for (const auto& s : result.stages) {
    out << "stage " << s.stage << (s.skipped ? " already complete" : "") << ": best epoch " << s.best_epoch
        << ", val_mae " << fixed(s.best_val_mae, 4) << (s.early_stopped ? ", stopped early" : "") << "\n";
  }
  out << "final checkpoint " << result.final_checkpoint.string() << "\n";
  return result;
}

EvalOutputs cmd_eval(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir, std::ostream& out,
                     const std::vector<std::size_t>& bins) {
  auto ck = model::load_checkpoint(checkpoint);
  auto dataset = splicegen::load_dataset(data);
  for (const auto& f : dataset.features) {
    if (f.dim != ck.model->config().latent) {
      throw VersionError("dataset features have " + std::to_string(f.dim) + " dimensions but the checkpoint expects " +
                         std::to_string(ck.model->config().latent));
    }
  }
  EvalOutputs result;
  result.report = eval::evaluate(*ck.model, ck.normalizer, dataset, bins);
  const fs::path dir = fs::is_directory(data) ? data : data.parent_path();
  result.report.name = dir.parent_path().filename().string() + "-" + dir.filename().string();
  result.json = out_dir / (result.report.name + ".json");
  result.csv = out_dir / (result.report.name + ".csv");
  write_text(result.json, result.report.to_json().dump(2) + "\n");
  write_text(result.csv, result.report.to_csv());

  const auto& o = result.report.overall;
  out << result.report.name << " (" << o.samples << " samples, " << model::to_string(ck.model->kind()) << ")\n";
  for (std::size_t i = 0; i < result.report.bins.size(); ++i) {
    out << "  Bin=" << result.report.bins[i] << "  J " << fixed(o.mean_j[i], 4) << "  R " << fixed(o.mean_r[i], 4)
        << "\n";
  }
  out << "reports " << result.json.string() << ", " << result.csv.string() << "\n";
  return result;
}

std::vector<eval::SweepEntry> cmd_sweep(const fs::path& checkpoint, const ExperimentConfig& config, std::size_t samples,
                                        int max_runs, const fs::path& out_dir, std::ostream& out) {
  config.validate();
  auto ck = model::load_checkpoint(checkpoint);
  auto base = config.split_config(config.stages.back(), Split::test);
  base.n_samples = samples;
  base.seed = num::derive_seed(config.seed, {0x5eed, static_cast<std::uint64_t>(config.stages.back())});
  const auto conditions = eval::default_conditions(base, max_runs);
  auto sweep = eval::robustness_sweep(*ck.model, ck.normalizer, conditions);
  write_text(out_dir / "sweep.json", eval::sweep_to_json(sweep).dump(2) + "\n");
  write_text(out_dir / "sweep.csv", eval::sweep_to_csv(sweep));
  for (const auto& e : sweep) {
    out << std::left << std::setw(22) << e.condition << " J@1 " << fixed(e.report.overall.mean_j.at(0), 4) << "  R@1 "
        << fixed(e.report.overall.mean_r.at(0), 4) << "\n";
  }
  for (const auto& [family, falling] : eval::degradation_trends(sweep)) {
    out << family << ": J " << (falling ? "non-increasing" : "not monotone") << " in codec runs\n";
  }
  return sweep;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_ranges(std::size_t n, std::size_t max_len) {
  if (max_len < 2) throw InputError("segments need at least two frames");
  if (n <= max_len) return {{0, n}};
  const std::size_t k = (n - 1 + max_len - 2) / (max_len - 1);  // ceil((n-1)/(max_len-1))
  const std::size_t len = (n + k - 1 + k - 1) / k;                // ceil((n+k-1)/k)
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t begin = j * (n - len) / (k - 1);
    out.emplace_back(begin, begin + len);
  }
  return out;
}

std::vector<double> InferReport::splice_times() const {
  std::vector<double> t;
  for (auto f : splice_frames) t.push_back(static_cast<double>(f) * frame_seconds);
  return t;
}

nlohmann::ordered_json InferReport::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["duration_s"] = duration_s;
  j["frames"] = frames;
  j["frame_seconds"] = frame_seconds;
  auto& segs = j["segments"] = nlohmann::ordered_json::array();
  for (auto [b, e] : segments) segs.push_back({{"first_frame", b}, {"end_frame", e}, {"offset_s", b * frame_seconds}});
  j["splice_frames"] = splice_frames;
  j["splice_times_s"] = splice_times();
  return j;
}

std::string InferReport::to_text() const {
  std::ostringstream os;
  os << input << ": " << fixed(duration_s, 2) << " s, " << frames << " frames, " << segments.size()
     << (segments.size() == 1 ? " segment\n" : " segments\n");
  if (splice_frames.empty()) os << "no splices found\n";
  const auto times = splice_times();
  for (std::size_t i = 0; i < splice_frames.size(); ++i) {
    os << "splice at frame " << splice_frames[i] << "  (" << fixed(times[i], 1) << " s - "
       << fixed(times[i] + frame_seconds, 1) << " s)\n";
  }
  return os.str();
}

InferReport cmd_infer(const fs::path& checkpoint, const fs::path& wav, std::optional<std::size_t> segment_frames) {
  auto ck = model::load_checkpoint(checkpoint);
  const auto audio = splicegen::read_wav(wav);
  features::FeatureConfig fc;
  fc.min_seconds = fc.block_seconds;
  if (fc.feature_dim() != ck.model->config().latent) {
    throw VersionError("checkpoint expects " + std::to_string(ck.model->config().latent) +
                       "-dimensional frames; the feature pipeline produces " + std::to_string(fc.feature_dim()));
  }
  const auto seq = features::build_frame_sequence(audio, fc, ck.normalizer.fitted() ? &ck.normalizer : nullptr);

  std::size_t limit = ck.model->config().max_frames;
  if (const auto trained = ck.meta.value("max_train_frames", std::size_t{0}); trained >= 2) {
    limit = std::min(limit, trained);
  }
  if (segment_frames) {
    if (*segment_frames < 2 || *segment_frames > ck.model->config().max_frames) {
      throw UsageError("segment length must be between 2 and " + std::to_string(ck.model->config().max_frames) +
                       " frames");
    }
    limit = *segment_frames;
  }

  InferReport report;
  report.input = wav.string();
  report.duration_s = audio.duration();
  report.frames = seq.n_frames;
  report.frame_seconds = fc.block_seconds;
  report.segments = segment_ranges(seq.n_frames, limit);
  for (auto [begin, end] : report.segments) {
    const auto local = ck.model->predict(seq.slice(begin, end).to_tensor<float>());
    for (auto f : local) report.splice_frames.push_back(begin + f);
  }
  std::sort(report.splice_frames.begin(), report.splice_frames.end());
  report.splice_frames.erase(std::unique(report.splice_frames.begin(), report.splice_frames.end()),
                             report.splice_frames.end());
  return report;
}

}  // namespace sigpointer::cli
