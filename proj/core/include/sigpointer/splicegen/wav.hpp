#pragma once

#include <filesystem>

#include "sigpointer/features/features.hpp"

namespace sigpointer::splicegen {

/// Reads 16-bit PCM mono WAV. Anything else is an input error.
features::Waveform read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono WAV, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const features::Waveform& w);

}  // namespace sigpointer::splicegen
