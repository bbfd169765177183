#include "sigpointer/splicegen/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sigpointer/errors.hpp"

namespace sigpointer::splicegen {

namespace {

std::uint32_t u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char(v >> 24)};
  out.write(b, 4);
}
void put16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char(v >> 8)};
  out.write(b, 2);
}

}  // namespace

features::Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open audio file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw InputError(path.string() + " is not a RIFF/WAVE file");

  std::size_t pos = 12;
  int channels = 0, rate = 0, bits = 0, format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0) break;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = u16(chunk + 8);
      channels = u16(chunk + 10);
      rate = static_cast<int>(u32(chunk + 12));
      bits = u16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (format != 1 || bits != 16) throw InputError(path.string() + ": only 16-bit PCM WAV is supported");
  if (channels != 1) throw InputError(path.string() + ": expected mono audio, found " + std::to_string(channels) + " channels");
  if (!data) throw InputError(path.string() + ": missing data chunk");

  features::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(static_cast<std::int16_t>(u16(data + 2 * i)) / 32768.0);
  return w;
}

void write_wav(const std::filesystem::path& path, const features::Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, bytes);
  for (float s : w.samples) {
    const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)))));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace sigpointer::splicegen
