#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "sigpointer/features/features.hpp"

namespace sigpointer::splicegen {

enum class Codec { none, proxy_amr, proxy_mp3, external };
enum class NoiseType { gaussian, pink, brown, babble };

std::string to_string(Codec codec);
Codec codec_from_string(const std::string& text);
std::string to_string(NoiseType noise);
NoiseType noise_from_string(const std::string& text);

struct PostProcSpec {
  std::optional<double> noise_snr_db;
  NoiseType noise_type = NoiseType::gaussian;
  Codec codec = Codec::none;
  double codec_strength = 0.0;  // [0, 1]
  int codec_runs = 1;
  /// Shell template for Codec::external, with {in} and {out} WAV placeholders.
  std::string external_command;

  void validate() const;
  /// Short condition label, e.g. "proxy-amr x2 + pink".
  std::string tag() const;
};

double mean_power(std::span<const float> x);
/// 10 log10(P_ref / P_(test - ref)); +inf for identical signals.
double reconstruction_snr_db(std::span<const float> reference, std::span<const float> test);

/// White Gaussian noise rescaled so the realised SNR equals snr_db. Silent
/// input uses a 0.1 RMS reference level.
features::Waveform add_gaussian_noise(const features::Waveform& w, double snr_db, std::uint64_t seed);
/// Same contract for the coloured stand-ins of recorded noise.
features::Waveform add_noise(const features::Waveform& w, double snr_db, NoiseType type, std::uint64_t seed);

/// Zero-phase windowed-sinc (Blackman) low-pass.
features::Waveform lowpass(const features::Waveform& w, double cutoff_hz, std::size_t taps = 127);
features::Waveform mu_law_quantize(const features::Waveform& w, int bits);

/// proxy-amr: band-limit to the narrowband channel, mu-law quantise with
/// 8 - round(4 strength) bits, band-limit again.
/// proxy-mp3: per-block DCT, keep the largest coefficients carrying
/// (1 - 0.8 strength) of the block energy.
features::Waveform codec_proxy(const features::Waveform& w, Codec codec, double strength);

/// Round-trips through a user-supplied encoder command. Failure raises
/// PostProcessError carrying the command's stderr.
features::Waveform run_external_codec(const features::Waveform& w, const std::string& command_template);

/// Noise first, then codec_runs codec passes.
features::Waveform apply_postprocessing(const features::Waveform& w, const PostProcSpec& spec, std::uint64_t seed);

}  // namespace sigpointer::splicegen
