#include <gtest/gtest.h>

#include "sigpointer/errors.hpp"
#include "sigpointer/eval/evaluate.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/selftest/checks.hpp"
#include "sigpointer/selftest/oracles.hpp"

using namespace sigpointer;
using eval::IndexSet;

namespace {

splicegen::Dataset labelled(const std::vector<IndexSet>& labels, std::size_t n_frames = 10) {
  splicegen::Dataset d;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    splicegen::ManifestEntry e;
    e.id = std::to_string(i);
    e.n_frames = n_frames;
    e.labels = labels[i];
    e.n_splices = labels[i].size();
    d.entries.push_back(e);
    features::FrameSequence f;
    f.n_frames = n_frames;
    f.dim = 1;
    f.values.assign(n_frames, 0.0f);
    d.features.push_back(f);
  }
  return d;
}

}  // namespace

TEST(Bins, FloorDivisionAndDedup) {
  EXPECT_EQ(eval::bin_indices(IndexSet{0, 1, 2, 3, 7}, 2), (IndexSet{0, 1, 3}));
  EXPECT_EQ(eval::bin_indices(IndexSet{5, 1}, 1), (IndexSet{1, 5}));
  EXPECT_TRUE(eval::bin_indices(IndexSet{}, 3).empty());
  EXPECT_THROW(eval::bin_indices(IndexSet{1}, 0), InputError);
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(eval::jaccard(IndexSet{1, 2}, IndexSet{2, 3}), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(eval::jaccard(IndexSet{}, IndexSet{}), 1.0);
  EXPECT_DOUBLE_EQ(eval::jaccard(IndexSet{4}, IndexSet{}), 0.0);
  EXPECT_DOUBLE_EQ(eval::jaccard(IndexSet{}, IndexSet{4}), 0.0);
  EXPECT_DOUBLE_EQ(eval::jaccard(IndexSet{3, 5}, IndexSet{5, 3}), 1.0);
}

TEST(Recall, Examples) {
  EXPECT_DOUBLE_EQ(eval::recall(IndexSet{1, 2}, IndexSet{2, 3}), 0.5);
  EXPECT_DOUBLE_EQ(eval::recall(IndexSet{}, IndexSet{}), 1.0);
  EXPECT_DOUBLE_EQ(eval::recall(IndexSet{4}, IndexSet{}), 0.0);
  EXPECT_DOUBLE_EQ(eval::recall(IndexSet{1, 2, 3}, IndexSet{2}), 1.0);
}

TEST(Metrics, MatchBitmaskOracles) {
  const auto r = selftest::check_metric_oracles(20000, 3);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Metrics, PerSampleJaccardCanDropWithCoarserBins) {
  const IndexSet predicted{0, 1}, truth{0, 1, 2};
  const double j1 = eval::jaccard(eval::bin_indices(predicted, 1), eval::bin_indices(truth, 1));
  const double j2 = eval::jaccard(eval::bin_indices(predicted, 2), eval::bin_indices(truth, 2));
  EXPECT_DOUBLE_EQ(j1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(j2, 0.5);
}

TEST(Evaluate, PerfectPredictorScoresOne) {
  const auto data = labelled({{1, 4}, {}, {9}, {0, 2, 5}});
  const auto report = eval::evaluate([&](std::size_t i) { return data.entries[i].labels; }, data);
  ASSERT_EQ(report.overall.samples, 4u);
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    EXPECT_DOUBLE_EQ(report.overall.mean_j[b], 1.0);
    EXPECT_DOUBLE_EQ(report.overall.mean_r[b], 1.0);
  }
  EXPECT_TRUE(report.monotone_in_bins());
}

TEST(Evaluate, EmptyPredictorOnCleanDataScoresOne) {
  const auto data = labelled({{}, {}, {}});
  const auto report = eval::evaluate([](std::size_t) { return IndexSet{}; }, data);
  EXPECT_DOUBLE_EQ(report.overall.mean_j[0], 1.0);
  EXPECT_DOUBLE_EQ(report.overall.mean_r[0], 1.0);
}

TEST(Evaluate, GroupsBySpliceCount) {
  const auto data = labelled({{1}, {}, {3}, {2, 6}});
  const auto report = eval::evaluate([](std::size_t) { return IndexSet{}; }, data, std::vector<std::size_t>{1});
  ASSERT_EQ(report.per_splice_count.size(), 3u);
  EXPECT_EQ(report.per_splice_count.at(1).samples, 2u);
  EXPECT_DOUBLE_EQ(report.per_splice_count.at(0).mean_j[0], 1.0);
  EXPECT_DOUBLE_EQ(report.per_splice_count.at(2).mean_j[0], 0.0);
  EXPECT_DOUBLE_EQ(report.overall.mean_j[0], 0.25);
}

TEST(Evaluate, MeanMatchesDirectAverage) {
  num::Rng rng(4);
  std::vector<IndexSet> truth, pred;
  for (int i = 0; i < 60; ++i) {
    IndexSet t, p;
    for (int k = 0, n = static_cast<int>(rng.integer(0, 3)); k < n; ++k) t.push_back(rng.integer(0, 19));
    for (int k = 0, n = static_cast<int>(rng.integer(0, 3)); k < n; ++k) p.push_back(rng.integer(0, 19));
    truth.push_back(eval::to_set(t));
    pred.push_back(eval::to_set(p));
  }
  const auto data = labelled(truth, 20);
  const auto report = eval::evaluate([&](std::size_t i) { return pred[i]; }, data);
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const std::size_t f = report.bins[b];
    double j = 0, r = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto tm = oracle::bin_mask(oracle::to_mask(truth[i]), f);
      const auto pm = oracle::bin_mask(oracle::to_mask(pred[i]), f);
      j += oracle::jaccard_mask(pm, tm);
      r += oracle::recall_mask(pm, tm);
    }
    EXPECT_NEAR(report.overall.mean_j[b], j / truth.size(), 1e-12);
    EXPECT_NEAR(report.overall.mean_r[b], r / truth.size(), 1e-12);
  }
}

TEST(Evaluate, ReportsAreDeterministic) {
  auto c = model::ModelConfig::sigpointer_star();
  c.encoder_layers = 1;
  c.ff_width = 16;
  model::AnyModel m(c, 5);
  const auto data = splicegen::generate_dataset(splicegen::DatasetConfig::toy(splicegen::Variant::toy_easy, 8, 3));
  const auto a = eval::evaluate(m, {}, data), b = eval::evaluate(m, {}, data);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  for (double j : a.overall.mean_j) {
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
  }
}

TEST(Evaluate, RejectsMismatchedFeatures) {
  auto data = labelled({{1}});
  data.features[0].n_frames = 3;
  EXPECT_THROW(eval::evaluate([](std::size_t) { return IndexSet{}; }, data), DataError);
}

TEST(Sweep, OneEntryPerCondition) {
  const auto base = splicegen::DatasetConfig::toy(splicegen::Variant::toy_hard, 3, 11);
  const auto conditions = eval::default_conditions(base, 2);
  ASSERT_EQ(conditions.size(), 1u + 2 * 2 + 3);
  auto c = model::ModelConfig::sigpointer_star();
  c.encoder_layers = 1;
  c.ff_width = 16;
  model::AnyModel m(c, 5);
  const auto sweep = eval::robustness_sweep(m, {}, conditions, std::vector<std::size_t>{1});
  ASSERT_EQ(sweep.size(), conditions.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    EXPECT_EQ(sweep[i].condition, conditions[i].name);
    EXPECT_EQ(sweep[i].report.overall.samples, 3u);
  }
  const auto trends = eval::degradation_trends(sweep);
  EXPECT_EQ(trends.size(), 2u);
  const auto csv = eval::sweep_to_csv(sweep);
  EXPECT_NE(csv.find("in-distribution"), std::string::npos);
}
