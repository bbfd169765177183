#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigpointer/model/checkpoint.hpp"
#include "sigpointer/numcore/optim.hpp"
#include "sigpointer/splicegen/dataset.hpp"

namespace sigpointer::train {

struct TrainConfig {
  double lr = 5e-4;
  std::size_t batch = 64;
  std::size_t epochs = 100;
  std::size_t patience = 20;
  std::uint64_t seed = 1;
  /// Linear ramp from lr / warmup_steps to lr over the first updates of each stage.
  std::size_t warmup_steps = 0;
  /// After warmup, cosine decay towards lr * final_lr_ratio at the end of the
  /// epoch budget. 1 keeps the rate constant.
  double final_lr_ratio = 1.0;
  /// Off writes seconds = 0 so logs are byte-identical across reruns.
  bool log_wall_time = true;

  void validate() const;
};

/// Learning rate for update `step` (1-based) of a stage with `total_steps` updates.
double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps);

/// One normalised training sample.
struct Example {
  num::Tensor<float> frames;  // [N x l]
  splicegen::SpliceLabels labels;
};

std::vector<Example> make_examples(const splicegen::Dataset& data, const features::FeatureNormalizer& normalizer);

/// One-hot rows: one per label (ascending), then the eos row. [|y|+1 x N+1].
template <typename T>
num::Tensor<T> make_targets(std::span<const std::size_t> labels, std::size_t n_frames,
                            model::EosPosition eos = model::EosPosition::after_frames);

/// mean_t (1 - cos(pred_t, target_t)).
template <typename T>
num::Tensor<T> cosine_loss(const num::Tensor<T>& predicted, const num::Tensor<T>& target);

/// Pairwise |a_i - b_i| over sorted inputs, `n_frames` per unmatched element,
/// divided by max(|pred|, |truth|). Both empty gives 0.
double mae_positions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth, std::size_t n_frames);

/// Mean per-sample loss: cosine loss with teacher stepping for the pointer
/// model, per-frame cross-entropy for the baseline.
num::Tensor<float> batch_loss(const model::AnyModel& model, std::span<const Example* const> batch,
                              const model::ForwardContext& ctx);

/// Forward, backward and one Adam update. Returns the loss; a non-finite loss
/// throws DivergenceError before any parameter changes.
double train_step(model::AnyModel& model, num::Adam<float>& optimizer, std::span<const Example* const> batch,
                  num::Rng& rng);

/// Mean mae_positions of greedy predictions.
double validation_mae(const model::AnyModel& model, std::span<const Example> data);

class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records an epoch's validation value; returns true on strict improvement.
  bool observe(double value);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t stale_epochs() const { return stale_; }
  std::optional<double> best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::optional<double> best_;
};

struct EpochRecord {
  int stage = 0;
  std::size_t epoch = 0;  // 0 = evaluation before training
  std::optional<double> train_loss;
  double val_mae = 0.0;
  double lr = 0.0;
  double seconds = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct StageData {
  int stage = 1;
  splicegen::Dataset train;
  splicegen::Dataset val;
};

struct StageOutcome {
  int stage = 0;
  bool skipped = false;  // already complete on disk
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  bool early_stopped = false;
  std::filesystem::path checkpoint;
};

struct CurriculumOptions {
  std::filesystem::path out_dir;
  TrainConfig train;
  bool resume = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct CurriculumResult {
  std::vector<StageOutcome> stages;
  std::filesystem::path final_checkpoint;
};

/// Trains stage by stage, warm-starting from the previous stage's best
/// weights. Writes out_dir/stage<k>/ (best checkpoint per stage),
/// out_dir/final/ and out_dir/train_log.jsonl.
CurriculumResult run_curriculum(model::AnyModel& model, std::span<const StageData> stages,
                                const CurriculumOptions& options);

}  // namespace sigpointer::train
