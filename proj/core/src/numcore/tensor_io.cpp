#include "sigpointer/numcore/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "sigpointer/errors.hpp"

namespace sigpointer::num {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("tensor file truncated (dims)");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const Shape& shape, std::span<const float> values) {
  if (shape.size() > 255) throw DimensionError("tensor rank exceeds 255");
  if (shape_size(shape) != values.size()) throw DimensionError("write_tensor: shape/data mismatch");
  out.write(kTensorMagic, 4);
  out.put(static_cast<char>(kTensorFormatVersion));
  out.put(static_cast<char>(shape.size()));
  for (auto d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  if (!out) throw DataError("write_tensor: stream error");
}

StoredTensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw DataError("not an SGPT tensor file");
  }
  const int version = in.get();
  if (version != kTensorFormatVersion) {
    throw VersionError("unsupported tensor format version " + std::to_string(version));
  }
  const int rank = in.get();
  if (rank < 0) throw DataError("tensor file truncated (rank)");
  StoredTensor t;
  t.shape.resize(static_cast<std::size_t>(rank));
  for (auto& d : t.shape) d = get_u32(in);
  t.values.resize(shape_size(t.shape));
  for (auto& v : t.values) v = std::bit_cast<float>(get_u32(in));
  return t;
}

void save_tensor(const std::filesystem::path& path, const Shape& shape, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tensor(out, shape, values);
}

StoredTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_tensor(in);
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& tensor) {
  std::vector<float> values(tensor.data().begin(), tensor.data().end());
  save_tensor(path, tensor.shape(), values);
}

template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);

}  // namespace sigpointer::num
