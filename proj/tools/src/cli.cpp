#include <filesystem>
#include <ostream>
#include <algorithm>
#include <sstream>

#include <CLI11.hpp>

#include "sigpointer/cli/commands.hpp"
#include "sigpointer/errors.hpp"
#include "sigpointer/selftest/checks.hpp"

namespace sigpointer::cli {

namespace fs = std::filesystem;

namespace {

// Config problems are usage errors, whatever layer detects them.
ExperimentConfig load_config(const fs::path& path, const std::string& out_override) {
  if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
  ExperimentConfig c;
  try {
    c = ExperimentConfig::load(path);
    if (!out_override.empty()) c.out_dir = out_override;
    c.validate();
  } catch (const InputError& e) {
    throw UsageError(e.what());
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Splice localisation in speech recordings with a continuous-input pointer network", "sigpointer"};
  app.require_subcommand(1);

  std::string config_path, out_override;

  auto* config_cmd = app.add_subcommand("config", "Print the default experiment config");

  auto* gen = app.add_subcommand("gen", "Generate the train/val/test data of one curriculum stage");
  int stage = 1;
  gen->add_option("-c,--config", config_path, "Experiment config (INI)")->required();
  gen->add_option("-s,--stage", stage, "Curriculum stage (1-3)")->required();
  gen->add_option("-o,--out", out_override, "Override the output directory");

  auto* train = app.add_subcommand("train", "Train the configured curriculum stages");
  bool fresh = false;
  train->add_option("-c,--config", config_path, "Experiment config (INI)")->required();
  train->add_option("-o,--out", out_override, "Override the output directory");
  train->add_flag("--fresh", fresh, "Retrain completed stages instead of resuming");

  auto* evaluate = app.add_subcommand("eval", "Score a checkpoint on a dataset or run the robustness sweep");
  std::string checkpoint, data, report_dir = "reports", sweep_config;
  std::vector<std::size_t> bins{1, 2, 3, 4};
  std::size_t sweep_samples = 200;
  int max_runs = 5;
  evaluate->add_option("-m,--checkpoint", checkpoint, "Checkpoint directory")->required();
  auto* data_opt = evaluate->add_option("-d,--data", data, "Dataset directory or manifest.jsonl");
  evaluate->add_option("-o,--out", report_dir, "Report directory")->capture_default_str();
  evaluate->add_option("--bins", bins, "Bin factors")->delimiter(',')->capture_default_str();
  auto* sweep_opt = evaluate->add_option("--sweep", sweep_config, "Run the robustness sweep with this config");
  evaluate->add_option("--sweep-samples", sweep_samples, "Samples per sweep condition")->capture_default_str();
  evaluate->add_option("--max-runs", max_runs, "Highest codec repetition count in the sweep")->capture_default_str();
  sweep_opt->excludes(data_opt);

  auto* infer = app.add_subcommand("infer", "Locate splices in a 16 kHz mono WAV file");
  std::string wav;
  std::size_t segment_frames = 0;
  bool as_json = false;
  infer->add_option("-m,--checkpoint", checkpoint, "Checkpoint directory")->required();
  infer->add_option("wav", wav, "Input WAV")->required();
  infer->add_option("--segment-frames", segment_frames, "Longest segment fed to the model");
  infer->add_flag("--json", as_json, "Print the report as JSON");

  auto* selftest = app.add_subcommand("selftest", "Run the oracle and invariant checks");
  std::uint64_t selftest_seed = 7;
  selftest->add_option("--seed", selftest_seed, "Seed for random instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (config_cmd->parsed()) {
      out << ExperimentConfig{}.to_ini();
    } else if (gen->parsed()) {
      if (stage < 1 || stage > 3) throw UsageError("stage must be 1, 2 or 3, got " + std::to_string(stage));
      cmd_gen(load_config(config_path, out_override), stage, out);
    } else if (train->parsed()) {
      cmd_train(load_config(config_path, out_override), out, !fresh);
    } else if (evaluate->parsed()) {
      if (!sweep_config.empty()) {
        cmd_sweep(checkpoint, load_config(sweep_config, ""), sweep_samples, max_runs, report_dir, out);
      } else if (data.empty()) {
        throw UsageError("eval needs --data or --sweep");
      } else {
        if (bins.empty() || std::count(bins.begin(), bins.end(), 0u)) throw UsageError("bin factors must be positive");
        cmd_eval(checkpoint, data, report_dir, out, bins);
      }
    } else if (infer->parsed()) {
      std::optional<std::size_t> seg;
      if (infer->count("--segment-frames")) seg = segment_frames;
      const auto report = cmd_infer(checkpoint, wav, seg);
      out << (as_json ? report.to_json().dump(2) + "\n" : report.to_text());
    } else if (selftest->parsed()) {
      selftest::SelftestOptions options;
      options.seed = selftest_seed;
      std::size_t failed = 0;
      for (const auto& r : selftest::run_all(options)) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        failed += !r.passed;
      }
      out << (failed ? std::to_string(failed) + " checks failed\n" : "all checks passed\n");
      if (failed) return kDivergence;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const VersionError& e) {
    err << "version error: " << e.what() << "\n";
    return kData;
  } catch (const PostProcessError& e) {
    err << "post-processing error: " << e.what() << "\n";
    return kData;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    err << "input error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

}  // namespace sigpointer::cli
