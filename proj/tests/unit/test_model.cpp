#include <cmath>

#include <gtest/gtest.h>

#include "sigpointer/errors.hpp"
#include "sigpointer/model/checkpoint.hpp"
#include "sigpointer/model/sigpointer.hpp"
#include "sigpointer/numcore/optim.hpp"
#include "sigpointer/selftest/checks.hpp"
#include "sigpointer/selftest/oracles.hpp"
#include "sigpointer/train/train.hpp"

using namespace sigpointer;
using model::ModelConfig;
using num::Tensor;

namespace {

ModelConfig tiny(model::ModelKind kind = model::ModelKind::sigpointer) {
  ModelConfig c;
  c.kind = kind;
  c.encoder_layers = 2;
  c.decoder_layers = 1;
  c.heads = 3;
  c.ff_width = 16;
  c.dropout = 0.1;
  c.latent = 12;
  c.max_frames = 20;
  return c;
}

template <typename T>
Tensor<T> frames(std::size_t n, std::size_t dim, std::uint64_t seed) {
  auto t = oracle::random_leaf(n, dim, seed, false);
  return Tensor<T>({n, dim}, std::vector<T>(t.data().begin(), t.data().end()));
}

bool equal(const Tensor<double>& a, const Tensor<double>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(Encode, AppendsOneEosRow) {
  model::SigPointer<double> m(tiny(), 1);
  for (std::size_t n : {1u, 5u, 20u}) EXPECT_EQ(m.encode(frames<double>(n, 12, n)).rows.rows(), n + 1);
}

TEST(Encode, FrameOrderMatters) {
  model::SigPointer<double> m(tiny(), 1);
  auto x = frames<double>(6, 12, 3);
  std::vector<double> swapped(x.data().begin(), x.data().end());
  std::swap_ranges(swapped.begin(), swapped.begin() + 12, swapped.begin() + 24);
  const auto a = m.encode(x).rows, b = m.encode(Tensor<double>({6, 12}, swapped)).rows;
  EXPECT_FALSE(equal(a, b));
}

TEST(Encode, DeterministicWithoutDropout) {
  model::SigPointer<float> m(tiny(), 1);
  const auto x = frames<float>(7, 12, 2);
  const auto a = m.encode(x).rows, b = m.encode(x).rows;
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Encode, TooManyFramesAsksForSegmentCutting) {
  model::SigPointer<float> m(tiny(), 1);
  try {
    m.encode(frames<float>(21, 12, 1));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("segment"), std::string::npos);
  }
  EXPECT_THROW(m.encode(frames<float>(5, 11, 1)), DimensionError);
}

TEST(DecoderQueries, FirstQueryIsPositionZero) {
  model::SigPointer<double> m(tiny(), 1);
  const auto z = m.decoder_queries(1);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(z.at(0, i), i % 2 == 0 ? 0.0 : 1.0);
}

TEST(DecoderQueries, PrefixStableAndValueFree) {
  model::SigPointer<double> m(tiny(), 1);
  const auto a = m.decoder_queries(3), b = m.decoder_queries(4);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 12; ++c) EXPECT_EQ(a.at(r, c), b.at(r, c));
  const auto mem = m.encode(frames<double>(8, 12, 4));
  const std::vector<std::size_t> p1{0}, p2{7};
  EXPECT_TRUE(equal(m.pointer_step(mem, p1), m.pointer_step(mem, p2)));
}

TEST(Pointer, HeadMeanThenSoftmax) {
  const Tensor<double> scores({2, 3}, {1, 2, 3, 3, 2, 1});
  for (double p : model::pointer_from_head_scores(scores)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Pointer, StepMatchesHeadScores) {
  model::SigPointer<double> m(tiny(), 5);
  const auto mem = m.encode(frames<double>(9, 12, 6));
  for (std::size_t q = 1; q <= 3; ++q) {
    const auto expect = model::pointer_from_head_scores(m.head_scores(mem, q));
    const auto got = m.pointer_step(mem, q);
    ASSERT_EQ(got.size(), 10u);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(got.data()[i], expect[i], 1e-12);
  }
}

TEST(Pointer, ContractsOnRandomInputs) {
  auto c = tiny();
  model::SigPointer<float> m(c, 9);
  const auto r = selftest::check_pointer_contracts(m, 200, 3);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Pointer, CosineLossReachesTheInput) {
  auto c = tiny();
  c.dropout = 0.0;
  model::SigPointer<double> m(c, 2);
  auto x = oracle::random_leaf(6, 12, 3);
  std::vector<Tensor<double>> xs{x};
  const std::vector<std::size_t> steps{2}, labels{3};
  auto dist = m.forward_batch(xs, steps, {})[0];
  train::cosine_loss(dist, train::make_targets<double>(labels, 6)).backward();
  double norm = 0;
  for (double g : x.grad()) norm += g * g;
  EXPECT_GT(norm, 1e-12);
}

TEST(Pointer, GradientReachesEveryEffectiveParameter) {
  for (bool prune : {true, false}) {
    auto c = tiny();
    c.decoder_layers = 2;
    c.prune_pointer_tail = prune;
    model::SigPointer<double> m(c, 4);
    std::vector<Tensor<double>> xs{frames<double>(7, 12, 1)};
    const std::vector<std::size_t> steps{3}, labels{2, 5};
    num::Rng rng(1);
    auto dist = m.forward_batch(xs, steps, {true, &rng})[0];
    train::cosine_loss(dist, train::make_targets<double>(labels, 7)).backward();

    std::size_t live = 0, key_bias = 0, tail = 0;
    for (const auto& [name, p] : m.parameters().items()) {
      double norm = 0;
      if (p.has_grad())
        for (double g : p.grad()) norm += g * g;
      norm = std::sqrt(norm);
      const bool is_key_bias = name.ends_with("key.bias");
      const bool in_tail = name.starts_with("decoder.1.") &&
                           (name.find("cross_attention.value") != std::string::npos ||
                            name.find("cross_attention.output") != std::string::npos ||
                            name.find("feed_forward") != std::string::npos || name.find("norm2") != std::string::npos ||
                            name.find("norm3") != std::string::npos);
      if (is_key_bias) {
        // Softmax ignores a per-row constant, so these never learn.
        EXPECT_LT(norm, 1e-12) << name;
        ++key_bias;
      } else if (in_tail) {
        EXPECT_EQ(norm, 0.0) << name;
        ++tail;
      } else {
        EXPECT_GT(norm, 1e-8) << name;
        ++live;
      }
    }
    EXPECT_EQ(tail, prune ? 0u : 12u);
    EXPECT_EQ(key_bias, c.encoder_layers + 2 * c.decoder_layers);
    EXPECT_EQ(live + key_bias + tail, m.parameters().items().size());
  }
}

TEST(Infer, DedupesAndSortsRawSlots) {
  const std::vector<std::size_t> raw{7, 3, 7};
  EXPECT_EQ(model::finalize_predictions(raw), std::vector<std::size_t>({3, 7}));
  EXPECT_TRUE(model::finalize_predictions({}).empty());
}

TEST(Infer, UnfinishedDecodingStopsAtTheStepCap) {
  model::SigPointer<float> m(tiny(), 3);
  std::size_t capped = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto r = m.infer(frames<float>(4 + s % 10, 12, s));
    if (!r.reached_eos) {
      EXPECT_EQ(r.raw_slots.size(), 6u);
      ++capped;
    } else {
      EXPECT_LE(r.raw_slots.size(), 6u);
      EXPECT_EQ(r.raw_slots.back(), m.eos_slot(4 + s % 10));
    }
  }
  EXPECT_GT(capped, 0u);
}

TEST(Infer, ModelTrainedOnCleanInputsStopsImmediately) {
  auto c = tiny();
  c.dropout = 0.0;
  model::SigPointer<double> m(c, 8);
  num::Adam<double> adam(m.parameters().tensors(), {1e-2});
  std::vector<Tensor<double>> xs;
  for (std::uint64_t s = 0; s < 4; ++s) xs.push_back(frames<double>(5 + s, 12, s));
  const std::vector<std::size_t> steps(4, 1);
  for (int it = 0; it < 40; ++it) {
    adam.zero_grad();
    auto dists = m.forward_batch(xs, steps, {});
    std::vector<Tensor<double>> losses;
    for (std::size_t b = 0; b < 4; ++b)
      losses.push_back(train::cosine_loss(dists[b], train::make_targets<double>({}, 5 + b)));
    num::mean_of<double>(losses).backward();
    adam.step();
  }
  for (std::size_t b = 0; b < 4; ++b) {
    const auto r = m.infer(xs[b]);
    EXPECT_TRUE(r.reached_eos);
    EXPECT_EQ(r.raw_slots, std::vector<std::size_t>({m.eos_slot(5 + b)}));
    EXPECT_TRUE(r.labels.empty());
  }
}

TEST(Baseline, TwoLogitsPerFrame) {
  model::EncoderBaseline<float> m(tiny(model::ModelKind::encoder_baseline), 1);
  for (std::size_t n : {1u, 7u, 20u}) {
    const auto logits = m.forward(frames<float>(n, 12, n));
    EXPECT_EQ(logits.shape(), (num::Shape{n, 2}));
    const auto p = num::softmax(logits);
    for (std::size_t r = 0; r < n; ++r) EXPECT_NEAR(p.at(r, 0) + p.at(r, 1), 1.0f, 1e-6);
  }
}

TEST(ParameterCount, ReferenceConfigurations) {
  const auto r = selftest::check_parameter_counts();
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_NEAR(model::count_parameters(ModelConfig::sigpointer_star()) / 3.40e6, 1.0, 0.10);
  EXPECT_NEAR(model::count_parameters(ModelConfig::transformer_encoder_baseline()) / 17.51e6, 1.0, 0.10);
}

TEST(ParameterCount, MatchesInstantiatedModels) {
  for (bool prune : {false, true}) {
    auto c = tiny();
    c.decoder_layers = 2;
    c.prune_pointer_tail = prune;
    EXPECT_EQ(model::SigPointer<float>(c, 1).parameters().scalar_count(), model::count_parameters(c));
  }
  const auto b = tiny(model::ModelKind::encoder_baseline);
  EXPECT_EQ(model::EncoderBaseline<float>(b, 1).parameters().scalar_count(), model::count_parameters(b));
}

TEST(ParameterCount, DegenerateAndMonotone) {
  auto c = ModelConfig::sigpointer_star();
  c.encoder_layers = 0;
  c.decoder_layers = 0;
  EXPECT_EQ(model::count_parameters(c), c.latent);
  auto wide = ModelConfig::sigpointer_star();
  wide.ff_width *= 2;
  EXPECT_GT(model::count_parameters(wide), model::count_parameters(ModelConfig::sigpointer_star()));
}

TEST(Config, RejectsIndivisibleHeads) {
  auto c = tiny();
  c.heads = 5;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  const auto dir = std::filesystem::temp_directory_path() / "sigpointer_unit_ckpt";
  std::filesystem::remove_all(dir);
  model::AnyModel m(tiny(), 5);
  features::FeatureNormalizer norm{std::vector<double>(12, 0.5), std::vector<double>(12, 2.0)};
  model::save_checkpoint(dir, m, norm, {{"note", "unit"}});
  ASSERT_TRUE(model::is_checkpoint(dir));
  const auto ck = model::load_checkpoint(dir);
  EXPECT_EQ(ck.model->config(), m.config());
  EXPECT_EQ(ck.normalizer.mean, norm.mean);
  EXPECT_EQ(ck.meta["note"], "unit");
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = frames<float>(10, 12, s);
    EXPECT_EQ(ck.model->predict(x), m.predict(x));
  }
  model::AnyModel other(tiny(model::ModelKind::encoder_baseline), 5);
  EXPECT_THROW(model::load_parameters(dir, other), VersionError);
  std::filesystem::remove_all(dir);
}
