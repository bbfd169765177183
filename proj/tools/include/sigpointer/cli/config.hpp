#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sigpointer/model/config.hpp"
#include "sigpointer/splicegen/dataset.hpp"
#include "sigpointer/train/train.hpp"

namespace sigpointer::cli {

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t val = 200;
  std::size_t test = 200;

  bool operator==(const SplitSizes&) const = default;
};

enum class Split { train = 0, val = 1, test = 2 };
std::string to_string(Split split);

/// Everything one experiment needs. Stored as an INI file; every field is
/// written out, so an echoed config reproduces the run on its own.
struct ExperimentConfig {
  std::filesystem::path out_dir = "run";
  std::uint64_t seed = 1;
  std::vector<int> stages{1, 2, 3};
  std::array<SplitSizes, 3> sizes{};

  /// Generation template; stage, sample count and seed are filled per split.
  splicegen::DatasetConfig data;
  model::ModelConfig model = model::ModelConfig::sigpointer_star();
  train::TrainConfig train;

  /// Throws InputError for values no command can run with.
  void validate() const;

  std::string to_ini() const;
  /// Missing keys keep their defaults; unknown keys and malformed values throw InputError.
  static ExperimentConfig from_ini(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Dataset recipe of one stage split; the seed is derived from (seed, stage, split).
  splicegen::DatasetConfig split_config(int stage, Split split) const;

  std::filesystem::path data_dir(int stage, Split split) const;
  std::filesystem::path model_dir() const { return out_dir / "model"; }
  std::filesystem::path reports_dir() const { return out_dir / "reports"; }

  bool operator==(const ExperimentConfig& other) const;
};

}  // namespace sigpointer::cli
