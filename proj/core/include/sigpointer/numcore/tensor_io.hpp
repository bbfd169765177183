#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::num {

// Binary layout: "SGPT" | u8 version | u8 rank | rank x u32 LE dims | f32 LE payload.
inline constexpr char kTensorMagic[4] = {'S', 'G', 'P', 'T'};
inline constexpr std::uint8_t kTensorFormatVersion = 1;

struct StoredTensor {
  Shape shape;
  std::vector<float> values;
};

void write_tensor(std::ostream& out, const Shape& shape, std::span<const float> values);
StoredTensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Shape& shape, std::span<const float> values);
StoredTensor load_tensor(const std::filesystem::path& path);

/// Writes any tensor, narrowing to f32.
template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& tensor);

}  // namespace sigpointer::num
