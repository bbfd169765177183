#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sigpointer::eval {

/// Sorted, duplicate-free index set.
using IndexSet = std::vector<std::size_t>;

IndexSet to_set(std::span<const std::size_t> indices);

/// {floor(i / f)}; f must be >= 1.
IndexSet bin_indices(std::span<const std::size_t> indices, std::size_t f);

/// |a & b| / |a | b|; 1 when both are empty.
double jaccard(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// |a & b| / |b|; for empty truth 1 if the prediction is empty, else 0.
double recall(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

}  // namespace sigpointer::eval
