// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "sigpointer/cli/commands.hpp"
#include "sigpointer/errors.hpp"
#include "sigpointer/eval/evaluate.hpp"
#include "sigpointer/selftest/checks.hpp"
#include "sigpointer/splicegen/splice.hpp"
#include "sigpointer/splicegen/wav.hpp"
#include "sigpointer/train/train.hpp"

using namespace sigpointer;
namespace fs = std::filesystem;
using splicegen::Variant;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sigpointer_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared by the toy learning and ordering runs.
train::TrainConfig toy_budget(std::size_t epochs) {
  train::TrainConfig t;
  t.epochs = epochs;
  t.patience = epochs - 1;
  t.batch = 4;
  t.lr = 1e-4;
  t.warmup_steps = 500;
  t.final_lr_ratio = 0.05;
  t.seed = 1;
  t.log_wall_time = false;
  return t;
}

struct ToySplits {
  splicegen::Dataset train, val, test;
};

ToySplits toy_data(Variant variant, std::size_t n_train, std::size_t n_val, std::size_t n_test) {
  return {splicegen::generate_dataset(splicegen::DatasetConfig::toy(variant, n_train, 101)),
          splicegen::generate_dataset(splicegen::DatasetConfig::toy(variant, n_val, 202)),
          splicegen::generate_dataset(splicegen::DatasetConfig::toy(variant, n_test, 303))};
}

struct ToyRun {
  double untrained_j = 0.0;
  double trained_j = 0.0;
  train::CurriculumResult result;
};

ToyRun train_toy(const model::ModelConfig& config, const ToySplits& data, const train::TrainConfig& budget,
                 const fs::path& dir, const std::string& label) {
  model::AnyModel m(config, 7);
  const auto normalizer = features::FeatureNormalizer::fit(data.train.features);
  const std::vector<std::size_t> bin1{1};
  ToyRun run;
  run.untrained_j = eval::evaluate(m, normalizer, data.test, bin1).overall.mean_j[0];

  train::CurriculumOptions o;
  o.out_dir = dir;
  o.resume = false;
  o.train = budget;
  o.on_epoch = [&](const train::EpochRecord& r) {
    if (r.epoch == 0) return;
    std::cout << fmt("    %s epoch %zu: loss %.4f, val MAE %.3f", label.c_str(), r.epoch, *r.train_loss, r.val_mae)
              << std::endl;
  };
  const std::vector<train::StageData> stages{{1, data.train, data.val}};
  run.result = train::run_curriculum(m, stages, o);
  const auto ck = model::load_checkpoint(run.result.final_checkpoint);
  run.trained_j = eval::evaluate(*ck.model, ck.normalizer, data.test, bin1).overall.mean_j[0];
  return run;
}

Outcome parameter_counts() {
  const auto sp = model::count_parameters(model::ModelConfig::sigpointer_star());
  const auto base = model::count_parameters(model::ModelConfig::transformer_encoder_baseline());
  const model::AnyModel built(model::ModelConfig::sigpointer_star(), 1);
  const bool ok = std::abs(double(sp) - 3.40e6) <= 0.34e6 && std::abs(double(base) - 17.51e6) <= 1.751e6 &&
                  built.parameters().scalar_count() == sp;
  return {ok, fmt("SigPointer* %zu, baseline %zu", sp, base)};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  auto results = selftest::check_op_gradients(5, 11);
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (auto& r : selftest::check_model_gradients(seed)) results.push_back(r);
  const double s = since(t0);
  std::size_t failed = 0;
  std::string first;
  for (const auto& r : results)
    if (!r.passed) {
      if (!failed++) first = r.name + ": " + r.detail;
    }
  return {failed == 0 && s < 120.0,
          fmt("%zu checks, %zu failed, %.1f s", results.size(), failed, s) + (first.empty() ? "" : " (" + first + ")")};
}

Outcome pointer_contracts() {
  const auto t0 = Clock::now();
  const model::SigPointer<float> m(model::ModelConfig::sigpointer_star(), 5);
  const auto r = selftest::check_pointer_contracts(m, 1000, 13);
  const double s = since(t0);
  return {r.passed && s < 60.0, fmt("1000 inputs, %.1f s, ", s) + r.detail};
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  const auto r = selftest::check_metric_oracles(100000, 17);
  const double s = since(t0);
  return {r.passed && s < 60.0, fmt("%.1f s, ", s) + r.detail};
}

// Splice at 10.25 s of a 12 s clip (mid-block, frame 20), built like the easy toy samples.
features::Waveform known_splice() {
  num::Rng rng(2024);
  const auto first = splicegen::SyntheticSpeaker::random(rng);
  const auto second = splicegen::SyntheticSpeaker::random(rng);
  std::vector<features::Waveform> parts{
      splicegen::extract_segment({first, 1, 2, true}, 10 * 16000 + 4000, false),
      splicegen::extract_segment({second, 2, 5, true}, 2 * 16000 - 4000, false)};
  return splicegen::splice(parts).audio;
}

Outcome toy_learning() {
  const auto t0 = Clock::now();
  const auto dir = scratch("easy");
  const auto data = toy_data(Variant::toy_easy, 2000, 200, 200);
  std::size_t max_frames = 0, max_n = 0;
  for (const auto& e : data.train.entries) {
    max_frames = std::max(max_frames, e.n_frames);
    max_n = std::max(max_n, e.n_splices);
    if (e.codec != "none" || e.noise != "none") return {false, "easy data is post-processed"};
  }
  std::cout << fmt("    easy data: %zu/%zu/%zu samples, N <= %zu, n <= %zu, %.0f s", data.train.size(),
                   data.val.size(), data.test.size(), max_frames, max_n, since(t0))
            << std::endl;
  const auto run = train_toy(model::ModelConfig::sigpointer_star(), data, toy_budget(30), dir, "easy");
  const double s = since(t0);

  // The trained toy model should also find a known splice through the inference path.
  splicegen::write_wav(dir / "known.wav", known_splice());
  const auto report = cli::cmd_infer(run.result.final_checkpoint, dir / "known.wav");
  const bool found = std::binary_search(report.splice_frames.begin(), report.splice_frames.end(), std::size_t{20});
  std::string frames;
  for (auto f : report.splice_frames) frames += (frames.empty() ? "" : ",") + std::to_string(f);
  std::cout << "    known splice at 10.25 s: frames {" << frames << "} over " << report.segments.size()
            << " segments" << (found ? "" : " (frame 20 missing)") << std::endl;

  fs::remove_all(dir);
  const bool ok = max_frames <= 20 && max_n <= 2 && run.trained_j >= 0.8 && run.trained_j > run.untrained_j &&
                  s <= 1800.0;
  return {ok, fmt("J@1 %.4f (untrained %.4f) after %zu epochs, %.0f s", run.trained_j, run.untrained_j,
                  run.result.stages[0].epochs_run, s)};
}

Outcome toy_ordering() {
  const auto t0 = Clock::now();
  const auto dir = scratch("hard");
  // Same sizes and budget as the learning check.
  const auto data = toy_data(Variant::toy_hard, 2000, 200, 200);
  const auto budget = toy_budget(30);
  const auto pointer = train_toy(model::ModelConfig::sigpointer_star(), data, budget, dir / "pointer", "pointer");
  const auto baseline =
      train_toy(model::ModelConfig::transformer_encoder_baseline(), data, budget, dir / "baseline", "baseline");
  fs::remove_all(dir);
  // Predicting nothing scores exactly the share of clean clips.
  std::size_t clean = 0;
  for (const auto& e : data.test.entries) clean += e.n_splices == 0;
  const double floor_j = double(clean) / double(data.test.size());
  const bool degenerate = std::abs(pointer.trained_j - floor_j) < 1e-9 && std::abs(baseline.trained_j - floor_j) < 1e-9;
  return {pointer.trained_j >= baseline.trained_j - 0.05,
          fmt("pointer J@1 %.4f (best epoch %zu), baseline J@1 %.4f (best epoch %zu), %.0f s", pointer.trained_j,
              pointer.result.stages[0].best_epoch, baseline.trained_j, baseline.result.stages[0].best_epoch,
              since(t0)) +
              (degenerate ? fmt(" (both at the no-splice rate %.3f)", floor_j) : std::string())};
}

struct Artifacts {
  std::string manifests, log, report_json, report_csv, infer;
};

Artifacts cli_pipeline(const fs::path& dir) {
  cli::ExperimentConfig c;
  c.out_dir = dir / "run";
  c.stages = {1, 2};
  for (auto& s : c.sizes) s = {10, 4, 4};
  c.data.max_seconds = 10.0;
  c.train.epochs = 2;
  c.train.patience = 1;
  c.train.batch = 4;
  c.train.log_wall_time = false;
  const auto ini = dir / "config.ini";
  c.save(ini);

  auto run = [](std::vector<std::string> args) {
    args.insert(args.begin(), "sigpointer");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) throw std::runtime_error(args[1] + " exited with " + std::to_string(code) + ": " + err.str());
    return out.str();
  };
  Artifacts a;
  for (const char* stage : {"1", "2"}) run({"gen", "-c", ini.string(), "-s", stage});
  for (int stage : {1, 2})
    for (auto split : {cli::Split::train, cli::Split::val, cli::Split::test})
      a.manifests += slurp(c.data_dir(stage, split) / "manifest.jsonl");
  run({"train", "-c", ini.string()});
  a.log = slurp(c.model_dir() / "train_log.jsonl");
  const auto model = (c.model_dir() / "final").string();
  run({"eval", "-m", model, "-d", c.data_dir(2, cli::Split::test).string(), "-o", (dir / "reports").string()});
  a.report_json = slurp(dir / "reports" / "stage2-test.json");
  a.report_csv = slurp(dir / "reports" / "stage2-test.csv");
  splicegen::write_wav(dir / "known.wav", known_splice());
  a.infer = run({"infer", "-m", model, (dir / "known.wav").string(), "--json"});
  // The report echoes the input path; the rest must match.
  a.infer = a.infer.substr(a.infer.find("\"duration_s\""));
  return a;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const auto dir_a = scratch("det_a"), dir_b = scratch("det_b");
  const auto a = cli_pipeline(dir_a);
  const auto b = cli_pipeline(dir_b);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  std::string diff;
  if (a.manifests != b.manifests) diff += " manifests";
  if (a.log != b.log) diff += " train-log";
  if (a.report_json != b.report_json || a.report_csv != b.report_csv) diff += " reports";
  if (a.infer != b.infer) diff += " infer";
  const bool nonempty = !a.manifests.empty() && !a.log.empty() && !a.report_json.empty();
  return {diff.empty() && nonempty,
          (diff.empty() ? std::string("gen, train, eval and infer reruns identical") : "differs:" + diff) +
              fmt(", %.0f s", since(t0))};
}

Outcome stopping_and_stages() {
  const auto t0 = Clock::now();
  std::string problems;

  // A model whose weights cannot move never improves after epoch 0.
  const auto dir = scratch("patience");
  model::AnyModel m(model::ModelConfig::sigpointer_star(), 3);
  const auto data = toy_data(Variant::toy_easy, 8, 4, 1);
  train::CurriculumOptions o;
  o.out_dir = dir;
  o.train.lr = 1e-12;
  o.train.epochs = 50;
  o.train.patience = 20;
  o.train.batch = 4;
  o.train.log_wall_time = false;
  const std::vector<train::StageData> stages{{1, data.train, data.val}};
  const auto r = train::run_curriculum(m, stages, o).stages.at(0);
  fs::remove_all(dir);
  if (!r.early_stopped || r.epochs_run != r.best_epoch + 20)
    problems += fmt(" stopped=%d after %zu epochs (best %zu)", r.early_stopped, r.epochs_run, r.best_epoch);

  for (int stage = 1; stage <= 3; ++stage) {
    splicegen::DatasetConfig c;
    c.stage = stage;
    c.n_samples = 150;
    c.seed = 41;
    c.max_seconds = 12.0;
    const auto d = splicegen::generate_dataset(c);
    const std::size_t limit = stage == 3 ? 5 : 1;
    std::set<std::size_t> counts;
    for (const auto& e : d.entries) {
      counts.insert(e.n_splices);
      const bool processed = e.codec != "none" || e.noise != "none";
      if (e.n_splices > limit || e.labels.size() > e.n_splices || processed != (stage > 1))
        problems += " stage" + std::to_string(stage) + ":" + e.id;
    }
    if (counts.size() != limit + 1) problems += fmt(" stage%d: only %zu splice counts", stage, counts.size());
  }
  return {problems.empty(), problems.empty() ? fmt("patience 20 honoured, stage rules hold, %.0f s", since(t0))
                                             : "violations:" + problems};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parameter counts", parameter_counts},
      {"gradient suite", gradients},
      {"pointer contracts", pointer_contracts},
      {"metric oracles", metric_oracles},
      {"toy learning", toy_learning},
      {"toy ordering", toy_ordering},
      {"determinism", determinism},
      {"early stopping and stage data", stopping_and_stages},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
