#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigpointer/eval/metrics.hpp"
#include "sigpointer/model/checkpoint.hpp"
#include "sigpointer/splicegen/dataset.hpp"

namespace sigpointer::eval {

/// Mean J and R per bin factor over a group of samples.
struct GroupScores {
  std::size_t samples = 0;
  std::vector<double> mean_j;
  std::vector<double> mean_r;
};

struct EvalReport {
  std::string name;
  std::vector<std::size_t> bins{1, 2, 3, 4};
  GroupScores overall;
  std::map<std::size_t, GroupScores> per_splice_count;
  std::map<std::string, GroupScores> per_condition;

  /// True when overall mean J and mean R never drop as the bin factor grows.
  bool monotone_in_bins() const;
  nlohmann::ordered_json to_json() const;
  /// One row per group: scope,samples,J@f,R@f for every bin f.
  std::string to_csv() const;
};

/// Predicted frame indices for sample `index` of the dataset.
using Predictor = std::function<std::vector<std::size_t>(std::size_t index)>;

EvalReport evaluate(const Predictor& predict, const splicegen::Dataset& data,
                    std::span<const std::size_t> bins = std::vector<std::size_t>{1, 2, 3, 4});

/// Normalises features with the checkpoint statistics and runs greedy inference.
EvalReport evaluate(const model::AnyModel& model, const features::FeatureNormalizer& normalizer,
                    const splicegen::Dataset& data,
                    std::span<const std::size_t> bins = std::vector<std::size_t>{1, 2, 3, 4});

/// A named test-set recipe.
struct Condition {
  std::string name;
  splicegen::DatasetConfig config;
};

/// The in-distribution set, codec_runs 1..5 for both codec proxies, and the
/// coloured / babble noise stand-ins, all derived from `base`.
std::vector<Condition> default_conditions(const splicegen::DatasetConfig& base, int max_runs = 5);

struct SweepEntry {
  std::string condition;
  EvalReport report;
};

std::vector<SweepEntry> robustness_sweep(const model::AnyModel& model, const features::FeatureNormalizer& normalizer,
                                         std::span<const Condition> conditions,
                                         std::span<const std::size_t> bins = std::vector<std::size_t>{1, 2, 3, 4});

/// Per codec family, whether Bin=1 J is non-increasing in codec_runs. Reported, never enforced.
std::map<std::string, bool> degradation_trends(std::span<const SweepEntry> sweep);

nlohmann::ordered_json sweep_to_json(std::span<const SweepEntry> sweep);
std::string sweep_to_csv(std::span<const SweepEntry> sweep);

}  // namespace sigpointer::eval
