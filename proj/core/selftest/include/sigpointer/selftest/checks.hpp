#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigpointer/model/sigpointer.hpp"

namespace sigpointer::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Every differentiable op against central differences in double precision.
std::vector<CheckResult> check_op_gradients(std::size_t instances, std::uint64_t seed, double tolerance = 1e-3);

/// Full training loss of a small pointer model (ragged batch of two) and of a
/// small baseline, differentiated w.r.t. inputs and every parameter.
std::vector<CheckResult> check_model_gradients(std::uint64_t seed, double tolerance = 1e-3);

/// Pointer distributions sum to one over N+1 slots, the newest step does not
/// depend on previous prediction values, greedy decoding halts within the
/// step limit and returns sorted unique in-range frames.
CheckResult check_pointer_contracts(const model::SigPointer<float>& model, std::size_t inputs, std::uint64_t seed);

/// Jaccard, recall and binning against bitmask oracles: all pairs of a
/// 6-element universe exhaustively, then random pairs over 12 elements.
CheckResult check_metric_oracles(std::size_t random_pairs, std::uint64_t seed);

CheckResult check_fft_oracles(std::uint64_t seed);
CheckResult check_adam_oracle();
CheckResult check_label_oracle(std::size_t samples, std::uint64_t seed);
CheckResult check_positional_oracle();
CheckResult check_parameter_counts();

struct SelftestOptions {
  std::size_t gradient_instances = 2;
  std::size_t pointer_inputs = 40;
  std::size_t metric_pairs = 20000;
  std::uint64_t seed = 7;
};

/// A quick pass over all checks.
std::vector<CheckResult> run_all(const SelftestOptions& options = {});

}  // namespace sigpointer::selftest
