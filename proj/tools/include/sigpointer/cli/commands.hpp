#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigpointer/cli/config.hpp"
#include "sigpointer/eval/evaluate.hpp"

namespace sigpointer::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

/// Bad command-line usage that the argument parser cannot catch.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Generates train/val/test data of one stage under out_dir/data/stage<k>/.
/// Prints the splice-count histogram of every split.
std::vector<splicegen::DatasetSummary> cmd_gen(const ExperimentConfig& config, int stage, std::ostream& out);

/// Trains the configured stages from previously generated data into out_dir/model/.
train::CurriculumResult cmd_train(const ExperimentConfig& config, std::ostream& out, bool resume = true);

struct EvalOutputs {
  eval::EvalReport report;
  std::filesystem::path json;
  std::filesystem::path csv;
};

/// Evaluates a checkpoint on a generated dataset (directory or manifest) and
/// writes <out_dir>/<name>.json and .csv.
EvalOutputs cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                     const std::filesystem::path& out_dir, std::ostream& out,
                     const std::vector<std::size_t>& bins = {1, 2, 3, 4});

/// Robustness sweep over the default test conditions, each `samples` long,
/// derived from the config's data settings. Writes sweep.json and sweep.csv.
std::vector<eval::SweepEntry> cmd_sweep(const std::filesystem::path& checkpoint, const ExperimentConfig& config,
                                        std::size_t samples, int max_runs, const std::filesystem::path& out_dir,
                                        std::ostream& out);

/// Frame ranges [begin, end) covering n frames with pieces of at most
/// max_len frames. Consecutive pieces overlap by at least one frame and
/// lengths differ by at most one.
std::vector<std::pair<std::size_t, std::size_t>> segment_ranges(std::size_t n, std::size_t max_len);

struct InferReport {
  std::string input;
  double duration_s = 0.0;
  std::size_t frames = 0;
  double frame_seconds = 0.5;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  std::vector<std::size_t> splice_frames;  // global, sorted, unique

  std::vector<double> splice_times() const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

/// Splice localisation of one WAV file. Inputs longer than the segment
/// length are cut into overlapping segments whose detections are mapped back
/// to global frames and merged. `segment_frames` defaults to the longest
/// sequence seen in training (else the model maximum).
InferReport cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& wav,
                      std::optional<std::size_t> segment_frames = std::nullopt);

/// Runs the command line; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sigpointer::cli
