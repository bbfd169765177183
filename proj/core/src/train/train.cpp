#include "sigpointer/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/ops.hpp"

namespace sigpointer::train {

namespace fs = std::filesystem;
using num::Tensor;

void TrainConfig::validate() const {
  if (lr <= 0.0) throw InputError("learning rate must be positive");
  if (batch == 0) throw InputError("batch size must be positive");
  if (epochs == 0) throw InputError("epochs must be positive");
  if (patience >= epochs) throw InputError("patience must be smaller than the epoch budget");
  if (!(final_lr_ratio > 0.0 && final_lr_ratio <= 1.0)) throw InputError("final_lr_ratio must lie in (0, 1]");
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  if (step <= config.warmup_steps) return config.lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  if (config.final_lr_ratio == 1.0 || total_steps <= config.warmup_steps) return config.lr;
  const double progress = std::min(1.0, static_cast<double>(step - config.warmup_steps) /
                                            static_cast<double>(total_steps - config.warmup_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::acos(-1.0) * progress));
  return config.lr * (config.final_lr_ratio + (1.0 - config.final_lr_ratio) * cosine);
}

std::vector<Example> make_examples(const splicegen::Dataset& data, const features::FeatureNormalizer& normalizer) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto seq = data.features[i];
    if (normalizer.fitted()) normalizer.apply(seq);
    out.push_back({seq.to_tensor<float>(), data.entries[i].labels});
  }
  return out;
}

template <typename T>
Tensor<T> make_targets(std::span<const std::size_t> labels, std::size_t n_frames, model::EosPosition eos) {
  const std::size_t slots = n_frames + 1, rows = labels.size() + 1;
  const bool after = eos == model::EosPosition::after_frames;
  std::vector<std::size_t> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<T> values(rows * slots, T{0});
  for (std::size_t t = 0; t < sorted.size(); ++t) {
    if (sorted[t] >= n_frames) throw InputError("label " + std::to_string(sorted[t]) + " outside the frame range");
    values[t * slots + sorted[t] + (after ? 0 : 1)] = T{1};
  }
  values[(rows - 1) * slots + (after ? n_frames : 0)] = T{1};
  return Tensor<T>({rows, slots}, std::move(values));
}

template <typename T>
Tensor<T> cosine_loss(const Tensor<T>& predicted, const Tensor<T>& target) {
  return num::cosine_distance(predicted, target);
}

double mae_positions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth, std::size_t n_frames) {
  if (predicted.empty() && truth.empty()) return 0.0;
  std::vector<std::size_t> a(predicted.begin(), predicted.end()), b(truth.begin(), truth.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t k = std::min(a.size(), b.size()), m = std::max(a.size(), b.size());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  total += static_cast<double>(m - k) * n_frames;
  return total / m;
}

Tensor<float> batch_loss(const model::AnyModel& model, std::span<const Example* const> batch,
                         const model::ForwardContext& ctx) {
  if (batch.empty()) throw InputError("empty training batch");
  std::vector<Tensor<float>> frames;
  frames.reserve(batch.size());
  for (const auto* ex : batch) frames.push_back(ex->frames);

  if (const auto* pointer = model.pointer()) {
    std::vector<std::size_t> steps;
    for (const auto* ex : batch) steps.push_back(ex->labels.size() + 1);
    const auto dists = pointer->forward_batch(frames, steps, ctx);
    std::vector<Tensor<float>> losses;
    losses.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto target = make_targets<float>(batch[b]->labels, batch[b]->frames.dim(0), pointer->config().eos_position);
      losses.push_back(cosine_loss(dists[b], target));
    }
    return num::mean_of<float>(losses);
  }

  const auto logits = model.baseline()->forward_batch(frames, ctx);
  std::vector<int> labels;
  for (const auto* ex : batch) {
    std::vector<int> per_frame(ex->frames.dim(0), 0);
    for (auto l : ex->labels) per_frame.at(l) = 1;
    labels.insert(labels.end(), per_frame.begin(), per_frame.end());
  }
  return num::cross_entropy(logits, labels);
}

double train_step(model::AnyModel& model, num::Adam<float>& optimizer, std::span<const Example* const> batch,
                  num::Rng& rng) {
  const model::ForwardContext ctx{true, &rng};
  auto loss = batch_loss(model, batch, ctx);
  const double value = loss.item();
  if (!std::isfinite(value)) throw DivergenceError("non-finite training loss (" + std::to_string(value) + ")");
  optimizer.zero_grad();
  loss.backward();
  optimizer.step();
  return value;
}

double validation_mae(const model::AnyModel& model, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) total += mae_positions(model.predict(ex.frames), ex.labels, ex.frames.dim(0));
  return total / data.size();
}

bool EarlyStopping::observe(double value) {
  if (!best_ || value < *best_) {
    best_ = value;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss ? nlohmann::ordered_json(*train_loss) : nlohmann::ordered_json(nullptr);
  j["val_mae"] = val_mae;
  j["lr"] = lr;
  j["seconds"] = seconds;
  return j;
}

namespace {

fs::path stage_dir(const fs::path& out, int stage) { return out / ("stage" + std::to_string(stage)); }

bool stage_complete(const fs::path& dir) {
  if (!model::is_checkpoint(dir)) return false;
  std::ifstream in(dir / "config.json");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  return !j.is_discarded() && j.contains("meta") && j["meta"].value("complete", false);
}

// Keeps log lines of stages before `first_stage`.
void truncate_log(const fs::path& path, int first_stage) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.value("stage", 0) < first_stage) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

nlohmann::json stage_meta(int stage, bool complete, std::size_t best_epoch, double best_mae, std::size_t max_frames) {
  return {{"stage", stage},
          {"complete", complete},
          {"best_epoch", best_epoch},
          {"best_val_mae", best_mae},
          {"max_train_frames", max_frames}};
}

}  // namespace

CurriculumResult run_curriculum(model::AnyModel& model, std::span<const StageData> stages,
                                const CurriculumOptions& options) {
  options.train.validate();
  if (stages.empty()) throw InputError("no curriculum stages given");
  for (const auto& s : stages)
    if (s.train.size() == 0 || s.val.size() == 0)
      throw DataError("stage " + std::to_string(s.stage) + " has an empty train or validation split");
  fs::create_directories(options.out_dir);
  const fs::path log_path = options.out_dir / "train_log.jsonl";

  std::size_t first = 0;
  if (options.resume)
    while (first < stages.size() && stage_complete(stage_dir(options.out_dir, stages[first].stage))) ++first;

  CurriculumResult result;
  features::FeatureNormalizer normalizer;
  std::size_t max_frames = 0;
  if (first > 0) {
    const auto prev = stage_dir(options.out_dir, stages[first - 1].stage);
    model::load_parameters(prev, model);
    auto ck = model::load_checkpoint(prev);
    normalizer = ck.normalizer;
    max_frames = ck.meta.value("max_train_frames", std::size_t{0});
  }
  if (first < stages.size()) truncate_log(log_path, first > 0 ? stages[first].stage : 0);
  std::ofstream log(log_path, std::ios::binary | std::ios::app);

  auto emit = [&](const EpochRecord& r) {
    log << r.to_json().dump() << '\n';
    log.flush();
    if (options.on_epoch) options.on_epoch(r);
  };

  for (std::size_t si = 0; si < stages.size(); ++si) {
    const auto& stage = stages[si];
    const fs::path dir = stage_dir(options.out_dir, stage.stage);
    StageOutcome outcome;
    outcome.stage = stage.stage;
    outcome.checkpoint = dir;
    if (si < first) {
      outcome.skipped = true;
      result.stages.push_back(outcome);
      continue;
    }

    if (!normalizer.fitted()) normalizer = features::FeatureNormalizer::fit(stage.train.features);
    const auto train_set = make_examples(stage.train, normalizer);
    const auto val_set = make_examples(stage.val, normalizer);
    for (const auto& ex : train_set) max_frames = std::max(max_frames, ex.frames.dim(0));

    const auto& cfg = options.train;
    num::Rng rng(num::derive_seed(cfg.seed, {static_cast<std::uint64_t>(stage.stage)}));
    num::Adam<float> optimizer(model.parameters().tensors(), {cfg.lr});
    EarlyStopping stopper(cfg.patience);

    auto clock = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      const auto now = std::chrono::steady_clock::now();
      const double s = std::chrono::duration<double>(now - clock).count();
      clock = now;
      return cfg.log_wall_time ? s : 0.0;
    };

    // Epoch 0: the warm-started weights are the first candidate.
    const double initial = validation_mae(model, val_set);
    stopper.observe(initial);
    outcome.best_val_mae = initial;
    model::save_checkpoint(dir, model, normalizer, stage_meta(stage.stage, false, 0, initial, max_frames));
    emit({stage.stage, 0, std::nullopt, initial, cfg.lr, elapsed()});

    std::vector<std::size_t> order(train_set.size());
    std::vector<const Example*> batch;
    const std::size_t per_epoch = (train_set.size() + cfg.batch - 1) / cfg.batch;
    std::size_t updates = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng.engine());
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        batch.clear();
        for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch); ++i)
          batch.push_back(&train_set[order[i]]);
        optimizer.set_lr(scheduled_lr(cfg, ++updates, per_epoch * cfg.epochs));
        try {
          loss_sum += train_step(model, optimizer, batch, rng);
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at stage " + std::to_string(stage.stage) + ", epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(batches));
        }
        ++batches;
      }
      const double mae = validation_mae(model, val_set);
      if (stopper.observe(mae)) {
        outcome.best_epoch = epoch;
        outcome.best_val_mae = mae;
        model::save_checkpoint(dir, model, normalizer, stage_meta(stage.stage, false, epoch, mae, max_frames));
      }
      outcome.epochs_run = epoch;
      emit({stage.stage, epoch, loss_sum / batches, mae, optimizer.hyper().lr, elapsed()});
      if (stopper.should_stop()) {
        outcome.early_stopped = true;
        break;
      }
    }

    model::load_parameters(dir, model);
    model::save_checkpoint(dir, model, normalizer,
                           stage_meta(stage.stage, true, outcome.best_epoch, outcome.best_val_mae, max_frames));
    result.stages.push_back(outcome);
  }

  const auto& last = stages.back();
  result.final_checkpoint = options.out_dir / "final";
  auto ck = model::load_checkpoint(stage_dir(options.out_dir, last.stage));
  model.copy_parameters_from(*ck.model);
  model::save_checkpoint(result.final_checkpoint, model, ck.normalizer, ck.meta);
  return result;
}

template Tensor<float> make_targets<float>(std::span<const std::size_t>, std::size_t, model::EosPosition);
template Tensor<double> make_targets<double>(std::span<const std::size_t>, std::size_t, model::EosPosition);
template Tensor<float> cosine_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> cosine_loss<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace sigpointer::train
