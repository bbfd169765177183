#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/train/train.hpp"

using namespace sigpointer;
using num::Tensor;
namespace fs = std::filesystem;

namespace {

model::ModelConfig tiny(model::ModelKind kind = model::ModelKind::sigpointer) {
  model::ModelConfig c;
  c.kind = kind;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.heads = 2;
  c.ff_width = 16;
  c.dropout = 0.0;
  c.latent = 8;
  c.max_frames = 16;
  return c;
}

// Random frames with a bump at every labelled frame.
splicegen::Dataset synthetic(std::size_t n, std::uint64_t seed, std::size_t max_splices = 2) {
  num::Rng rng(seed);
  splicegen::Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    features::FrameSequence seq;
    seq.n_frames = static_cast<std::size_t>(rng.integer(6, 12));
    seq.dim = 8;
    seq.values.resize(seq.n_frames * seq.dim);
    for (auto& v : seq.values) v = static_cast<float>(rng.normal());
    splicegen::ManifestEntry e;
    e.id = "x" + std::to_string(i);
    e.n_frames = seq.n_frames;
    const auto k = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(max_splices)));
    for (std::size_t j = 0; j < k; ++j) e.labels.push_back(static_cast<std::size_t>(rng.integer(0, seq.n_frames - 1)));
    std::sort(e.labels.begin(), e.labels.end());
    e.labels.erase(std::unique(e.labels.begin(), e.labels.end()), e.labels.end());
    for (auto l : e.labels) seq.values[l * seq.dim] += 6.0f;
    e.n_splices = e.labels.size();
    d.entries.push_back(e);
    d.features.push_back(seq);
  }
  return d;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sigpointer_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<const train::Example*> pointers(const std::vector<train::Example>& xs) {
  std::vector<const train::Example*> out;
  for (const auto& x : xs) out.push_back(&x);
  return out;
}

}  // namespace

TEST(CosineLoss, MatchingOneHotIsZero) {
  const auto t = train::make_targets<double>(std::vector<std::size_t>{2}, 4);
  EXPECT_NEAR(train::cosine_loss(t, t).item(), 0.0, 1e-12);
}

TEST(CosineLoss, OrthogonalOneHotIsOne) {
  const auto t = train::make_targets<double>(std::vector<std::size_t>{}, 4);
  const Tensor<double> p({1, 5}, {1, 0, 0, 0, 0});
  EXPECT_NEAR(train::cosine_loss(p, t).item(), 1.0, 1e-12);
}

TEST(CosineLoss, UniformAgainstOneHot) {
  for (std::size_t n : {2u, 5u, 91u}) {
    const Tensor<double> p({1, n}, std::vector<double>(n, 1.0 / n));
    const auto t = train::make_targets<double>(std::vector<std::size_t>{}, n - 1);
    EXPECT_NEAR(train::cosine_loss(p, t).item(), 1.0 - 1.0 / std::sqrt(double(n)), 1e-12);
  }
}

TEST(CosineLoss, StaysWithinRange) {
  num::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(12);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const auto l = train::cosine_loss(Tensor<double>({2, 6}, v),
                                      train::make_targets<double>(std::vector<std::size_t>{1}, 5)).item();
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(Targets, OneRowPerLabelThenEos) {
  const std::vector<std::size_t> y{1, 4};
  const auto t = train::make_targets<float>(y, 6);
  ASSERT_EQ(t.shape(), (num::Shape{3, 7}));
  EXPECT_EQ(t.at(0, 1), 1.0f);
  EXPECT_EQ(t.at(1, 4), 1.0f);
  EXPECT_EQ(t.at(2, 6), 1.0f);
  float total = 0;
  for (float v : t.data()) total += v;
  EXPECT_EQ(total, 3.0f);
  const auto before = train::make_targets<float>(y, 6, model::EosPosition::before_frames);
  EXPECT_EQ(before.at(0, 2), 1.0f);
  EXPECT_EQ(before.at(2, 0), 1.0f);
}

TEST(Mae, Examples) {
  EXPECT_DOUBLE_EQ(train::mae_positions(std::vector<std::size_t>{3}, std::vector<std::size_t>{5}, 10), 2.0);
  EXPECT_DOUBLE_EQ(train::mae_positions({}, {}, 10), 0.0);
  EXPECT_DOUBLE_EQ(train::mae_positions(std::vector<std::size_t>{3}, std::vector<std::size_t>{3, 8}, 10), 5.0);
}

TEST(Mae, SymmetricAndZeroOnlyWhenEqual) {
  num::Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> a, b;
    for (int i = 0, n = static_cast<int>(rng.integer(0, 4)); i < n; ++i) a.push_back(rng.integer(0, 9));
    for (int i = 0, n = static_cast<int>(rng.integer(0, 4)); i < n; ++i) b.push_back(rng.integer(0, 9));
    const double ab = train::mae_positions(a, b, 10), ba = train::mae_positions(b, a, 10);
    EXPECT_DOUBLE_EQ(ab, ba);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(ab == 0.0, a == b);
  }
}

TEST(TrainStep, LossUsuallyFallsOnAFixedBatch) {
  model::AnyModel m(tiny(), 3);
  const auto data = synthetic(8, 1);
  const auto examples = train::make_examples(data, {});
  const auto batch = pointers(examples);
  num::Adam<float> adam(m.parameters().tensors(), {1e-3});
  num::Rng rng(1);
  int fell = 0;
  for (int step = 0; step < 100; ++step) {
    const double before = train::batch_loss(m, batch, {}).item();
    train::train_step(m, adam, batch, rng);
    const double after = train::batch_loss(m, batch, {}).item();
    fell += after < before;
  }
  EXPECT_GE(fell, 80);
}

TEST(TrainStep, SameSeedSameTrajectory) {
  auto run = [] {
    auto c = tiny();
    c.dropout = 0.1;
    model::AnyModel m(c, 4);
    const auto examples = train::make_examples(synthetic(6, 2), {});
    const auto batch = pointers(examples);
    num::Adam<float> adam(m.parameters().tensors(), {1e-3});
    num::Rng rng(9);
    std::vector<double> losses;
    for (int i = 0; i < 10; ++i) losses.push_back(train::train_step(m, adam, batch, rng));
    return losses;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainStep, CleanOnlyBatchHasFiniteLoss) {
  model::AnyModel m(tiny(), 3);
  const auto examples = train::make_examples(synthetic(5, 3, 0), {});
  for (const auto& e : examples) ASSERT_TRUE(e.labels.empty());
  num::Adam<float> adam(m.parameters().tensors(), {1e-3});
  num::Rng rng(1);
  EXPECT_TRUE(std::isfinite(train::train_step(m, adam, pointers(examples), rng)));
}

TEST(TrainStep, BaselineUsesPerFrameCrossEntropy) {
  model::AnyModel m(tiny(model::ModelKind::encoder_baseline), 3);
  const auto examples = train::make_examples(synthetic(4, 3), {});
  const double loss = train::batch_loss(m, pointers(examples), {}).item();
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 0.0);
}

TEST(TrainStep, NonFiniteLossAbortsBeforeUpdating) {
  model::AnyModel m(tiny(), 3);
  auto data = synthetic(2, 4);
  data.features[0].values[0] = std::numeric_limits<float>::quiet_NaN();
  const auto examples = train::make_examples(data, {});
  const auto before = m.parameters().tensors()[0];
  const std::vector<float> snapshot(before.data().begin(), before.data().end());
  num::Adam<float> adam(m.parameters().tensors(), {1e-3});
  num::Rng rng(1);
  EXPECT_THROW(train::train_step(m, adam, pointers(examples), rng), DivergenceError);
  EXPECT_TRUE(std::equal(snapshot.begin(), snapshot.end(), before.data().begin()));
  EXPECT_EQ(adam.step_count(), 0u);
}

TEST(EarlyStopping, StopsAfterExactlyPatienceStaleEpochs) {
  train::EarlyStopping s(20);
  EXPECT_TRUE(s.observe(5.0));
  EXPECT_TRUE(s.observe(4.0));
  for (int i = 1; i <= 20; ++i) {
    EXPECT_FALSE(s.should_stop());
    EXPECT_FALSE(s.observe(i % 2 ? 4.0 : 4.5));  // ties do not count as progress
  }
  EXPECT_TRUE(s.should_stop());
  EXPECT_EQ(s.stale_epochs(), 20u);
  EXPECT_EQ(*s.best(), 4.0);
}

TEST(Curriculum, FrozenModelStopsAfterTwentyEpochs) {
  const auto dir = scratch("frozen");
  model::AnyModel m(tiny(), 2);
  std::vector<train::StageData> stages{{1, synthetic(6, 1), synthetic(4, 2)}};
  train::CurriculumOptions o;
  o.out_dir = dir;
  o.train.lr = 1e-12;  // far below float resolution of the weights
  o.train.epochs = 40;
  o.train.patience = 20;
  o.train.batch = 4;
  o.train.log_wall_time = false;
  const auto r = train::run_curriculum(m, stages, o);
  ASSERT_EQ(r.stages.size(), 1u);
  EXPECT_TRUE(r.stages[0].early_stopped);
  EXPECT_EQ(r.stages[0].epochs_run, 20u);
  EXPECT_EQ(r.stages[0].best_epoch, 0u);
  fs::remove_all(dir);
}

TEST(Curriculum, ThreeStagesWriteCheckpointsAndResume) {
  const auto dir = scratch("curriculum");
  std::vector<train::StageData> stages{{1, synthetic(8, 1, 1), synthetic(4, 2, 1)},
                                       {2, synthetic(8, 3), synthetic(4, 4)},
                                       {3, synthetic(8, 5, 5), synthetic(4, 6, 5)}};
  train::CurriculumOptions o;
  o.out_dir = dir;
  o.train.epochs = 3;
  o.train.patience = 2;
  o.train.batch = 4;
  o.train.lr = 1e-3;
  o.train.log_wall_time = false;
  std::vector<train::EpochRecord> seen;
  o.on_epoch = [&](const train::EpochRecord& r) { seen.push_back(r); };

  model::AnyModel m(tiny(), 2);
  const auto r = train::run_curriculum(m, stages, o);
  for (int s = 1; s <= 3; ++s) EXPECT_TRUE(model::is_checkpoint(dir / ("stage" + std::to_string(s))));
  EXPECT_TRUE(model::is_checkpoint(r.final_checkpoint));

  for (const auto& outcome : r.stages) {
    double last = 0;
    for (const auto& e : seen)
      if (e.stage == outcome.stage && e.epoch == outcome.epochs_run) last = e.val_mae;
    EXPECT_LE(outcome.best_val_mae, last);
  }
  const auto log = slurp(dir / "train_log.jsonl");
  std::istringstream lines(log);
  std::size_t count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"stage", "epoch", "train_loss", "val_mae", "lr", "seconds"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(j["seconds"], 0.0);
  }
  EXPECT_EQ(count, seen.size());

  // Everything is complete: a resumed run trains nothing and leaves the log alone.
  seen.clear();
  model::AnyModel again(tiny(), 2);
  const auto r2 = train::run_curriculum(again, stages, o);
  for (const auto& s : r2.stages) EXPECT_TRUE(s.skipped);
  EXPECT_TRUE(seen.empty());
  EXPECT_EQ(slurp(dir / "train_log.jsonl"), log);

  // Dropping the last stage's completion resumes from stage 3 with stage 2's weights.
  fs::remove_all(dir / "stage3");
  model::AnyModel third(tiny(), 99);
  const auto r3 = train::run_curriculum(third, stages, o);
  EXPECT_TRUE(r3.stages[0].skipped);
  EXPECT_TRUE(r3.stages[1].skipped);
  EXPECT_FALSE(r3.stages[2].skipped);
  ASSERT_FALSE(seen.empty());
  EXPECT_EQ(seen.front().stage, 3);
  EXPECT_EQ(slurp(dir / "train_log.jsonl"), log);
  fs::remove_all(dir);
}

TEST(Curriculum, RejectsEmptySplits) {
  model::AnyModel m(tiny(), 2);
  std::vector<train::StageData> stages{{1, synthetic(4, 1), splicegen::Dataset{}}};
  train::CurriculumOptions o;
  o.out_dir = scratch("empty");
  o.train.epochs = 2;
  o.train.patience = 1;
  EXPECT_THROW(train::run_curriculum(m, stages, o), DataError);
}

TEST(Config, PatienceMustBeBelowEpochs) {
  train::TrainConfig c;
  c.patience = 100;
  EXPECT_THROW(c.validate(), InputError);
}
