#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigpointer/features/features.hpp"
#include "sigpointer/model/sigpointer.hpp"

namespace sigpointer::model {

/// Either trainable model, dispatched on ModelConfig::kind.
class AnyModel {
 public:
  AnyModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const;
  ParameterSet<float>& parameters();
  const ParameterSet<float>& parameters() const;
  ModelKind kind() const { return config().kind; }

  SigPointer<float>* pointer() { return std::get_if<SigPointer<float>>(model_.get()); }
  const SigPointer<float>* pointer() const { return std::get_if<SigPointer<float>>(model_.get()); }
  EncoderBaseline<float>* baseline() { return std::get_if<EncoderBaseline<float>>(model_.get()); }
  const EncoderBaseline<float>* baseline() const { return std::get_if<EncoderBaseline<float>>(model_.get()); }

  /// Sorted splice frame predictions for one [N x l] input.
  std::vector<std::size_t> predict(const num::Tensor<float>& frames) const;

  /// Copies parameter values (not graph state) from another model of the same config.
  void copy_parameters_from(const AnyModel& other);

 private:
  std::unique_ptr<std::variant<SigPointer<float>, EncoderBaseline<float>>> model_;
};

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  std::unique_ptr<AnyModel> model;
  features::FeatureNormalizer normalizer;
  nlohmann::json meta;  // free-form training metadata
};

nlohmann::ordered_json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

/// Directory layout: config.json, params/<name>.sgpt, feature_mean.sgpt, feature_std.sgpt.
void save_checkpoint(const std::filesystem::path& dir, const AnyModel& model,
                     const features::FeatureNormalizer& normalizer, const nlohmann::json& meta = nlohmann::json::object());

/// Throws DataError for missing files and VersionError for format or shape mismatches.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Overwrites the parameters of `model` from a checkpoint directory with a matching config.
void load_parameters(const std::filesystem::path& dir, AnyModel& model);

bool is_checkpoint(const std::filesystem::path& dir);

}  // namespace sigpointer::model
