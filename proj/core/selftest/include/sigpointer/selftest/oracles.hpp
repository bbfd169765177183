#pragma once

// Independent reference implementations used to validate the library.
// They favour obviousness over speed.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::oracle {

struct GradCheck {
  double max_rel_error = 0.0;  // max over inputs of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
  std::size_t checked = 0;     // scalar entries compared
};

using ScalarFn = std::function<num::Tensor<double>(std::span<const num::Tensor<double>>)>;

/// Central differences against reverse-mode gradients. Every input must be a
/// leaf with requires_grad set; f must be deterministic.
GradCheck check_gradients(const ScalarFn& f, std::span<const num::Tensor<double>> inputs, double h = 1e-6);

/// Random [rows x cols] leaf with entries ~ U(-1, 1).
num::Tensor<double> random_leaf(std::size_t rows, std::size_t cols, std::uint64_t seed, bool requires_grad = true);

// Sets as bitmasks over a small universe.
std::uint32_t to_mask(std::span<const std::size_t> indices);
std::vector<std::size_t> from_mask(std::uint32_t mask);
std::uint32_t bin_mask(std::uint32_t mask, std::size_t f);
double jaccard_mask(std::uint32_t predicted, std::uint32_t truth);
double recall_mask(std::uint32_t predicted, std::uint32_t truth);

/// O(n^2) DFT.
std::vector<std::complex<double>> direct_dft(std::span<const double> x);
/// O(n^2) orthonormal DCT-II.
std::vector<double> direct_dct2(std::span<const double> x);

/// Parameter change of the first bias-corrected Adam step for a constant gradient.
double adam_first_step(double grad, double lr, double beta1, double beta2, double eps);

/// Frame labels of junctions between consecutive segments of the given durations.
std::vector<std::size_t> boundary_time_labels(std::span<const double> segment_seconds, double block_seconds = 0.5);

/// Hand-rolled positional encoding row, written independently of the model code.
std::vector<double> sinusoid_row(std::size_t position, std::size_t dim);

}  // namespace sigpointer::oracle
