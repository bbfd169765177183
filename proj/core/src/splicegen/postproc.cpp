#include "sigpointer/splicegen/postproc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/fft.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/splicegen/synth.hpp"
#include "sigpointer/splicegen/wav.hpp"

namespace sigpointer::splicegen {

using features::Waveform;

std::string to_string(Codec codec) {
  switch (codec) {
    case Codec::none: return "none";
    case Codec::proxy_amr: return "proxy-amr";
    case Codec::proxy_mp3: return "proxy-mp3";
    case Codec::external: return "external";
  }
  return "none";
}

Codec codec_from_string(const std::string& text) {
  if (text == "none") return Codec::none;
  if (text == "proxy-amr") return Codec::proxy_amr;
  if (text == "proxy-mp3") return Codec::proxy_mp3;
  if (text == "external") return Codec::external;
  throw InputError("unknown codec '" + text + "'");
}

std::string to_string(NoiseType noise) {
  switch (noise) {
    case NoiseType::gaussian: return "gaussian";
    case NoiseType::pink: return "pink";
    case NoiseType::brown: return "brown";
    case NoiseType::babble: return "babble";
  }
  return "gaussian";
}

NoiseType noise_from_string(const std::string& text) {
  if (text == "gaussian") return NoiseType::gaussian;
  if (text == "pink") return NoiseType::pink;
  if (text == "brown") return NoiseType::brown;
  if (text == "babble") return NoiseType::babble;
  throw InputError("unknown noise type '" + text + "'");
}

void PostProcSpec::validate() const {
  if (codec_strength < 0.0 || codec_strength > 1.0) throw InputError("codec strength must lie in [0, 1]");
  if (codec_runs < 1) throw InputError("codec_runs must be at least 1");
  if (codec == Codec::external && external_command.empty())
    throw InputError("external codec selected without a command template");
}

std::string PostProcSpec::tag() const {
  std::string out;
  if (codec != Codec::none) out = to_string(codec) + " x" + std::to_string(codec_runs);
  if (noise_snr_db) out += (out.empty() ? "" : " + ") + to_string(noise_type);
  return out.empty() ? "clean" : out;
}

double mean_power(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / x.size();
}

double reconstruction_snr_db(std::span<const float> reference, std::span<const float> test) {
  if (reference.size() != test.size()) throw DimensionError("SNR needs equal-length signals");
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = static_cast<double>(test[i]) - reference[i];
    err += d * d;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mean_power(reference) * reference.size() / err);
}

namespace {

std::vector<double> raw_noise(std::size_t n, NoiseType type, std::uint64_t seed, int sample_rate) {
  num::Rng rng(seed);
  std::vector<double> out(n);
  switch (type) {
    case NoiseType::gaussian:
      for (auto& v : out) v = rng.normal();
      break;
    case NoiseType::pink: {
      // Paul Kellet's refined pink filter
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (auto& v : out) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case NoiseType::brown: {
      double acc = 0.0;
      for (auto& v : out) v = acc = 0.995 * acc + rng.normal();
      break;
    }
    case NoiseType::babble: {
      const double seconds = std::max(0.5, static_cast<double>(n) / sample_rate);
      for (int talker = 0; talker < 4; ++talker) {
        const auto speaker = SyntheticSpeaker::random(rng);
        const auto voice = synth_utterance(speaker, rng.bits(), seconds, sample_rate);
        for (std::size_t i = 0; i < n && i < voice.samples.size(); ++i) out[i] += voice.samples[i];
      }
      break;
    }
  }
  return out;
}

}  // namespace

Waveform add_noise(const Waveform& w, double snr_db, NoiseType type, std::uint64_t seed) {
  Waveform out = w;
  if (w.samples.empty()) return out;
  double signal = mean_power(w.samples);
  if (signal <= 0.0) signal = 0.01;  // 0.1 RMS reference for silence
  auto noise = raw_noise(w.samples.size(), type, seed, w.sample_rate);
  double power = 0.0;
  for (double v : noise) power += v * v;
  power /= noise.size();
  if (power <= 0.0) return out;
  const double scale = std::sqrt(signal / std::pow(10.0, snr_db / 10.0) / power);
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = static_cast<float>(out.samples[i] + scale * noise[i]);
  return out;
}

Waveform add_gaussian_noise(const Waveform& w, double snr_db, std::uint64_t seed) {
  return add_noise(w, snr_db, NoiseType::gaussian, seed);
}

Waveform lowpass(const Waveform& w, double cutoff_hz, std::size_t taps) {
  if (taps % 2 == 0) ++taps;
  const double fc = cutoff_hz / w.sample_rate;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - half;
    const double sinc = m == 0.0 ? 2 * fc : std::sin(2 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double window = 0.42 - 0.5 * std::cos(2 * std::numbers::pi * i / (taps - 1)) +
                          0.08 * std::cos(4 * std::numbers::pi * i / (taps - 1));
    h[i] = sinc * window;
    sum += h[i];
  }
  for (auto& v : h) v /= sum;

  Waveform out = w;
  const auto n = static_cast<std::ptrdiff_t>(w.samples.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const std::ptrdiff_t j = i - k;
      if (j >= 0 && j < n) acc += h[k + half] * w.samples[j];
    }
    out.samples[i] = static_cast<float>(acc);
  }
  return out;
}

Waveform mu_law_quantize(const Waveform& w, int bits) {
  if (bits < 1 || bits > 16) throw InputError("mu-law bit depth must lie in [1, 16]");
  constexpr double mu = 255.0;
  const double levels = std::pow(2.0, bits) - 1.0;
  Waveform out = w;
  for (auto& s : out.samples) {
    const double x = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const double y = std::copysign(std::log1p(mu * std::abs(x)) / std::log1p(mu), x);
    const double q = std::round((y + 1.0) / 2.0 * levels) / levels * 2.0 - 1.0;
    s = static_cast<float>(std::copysign((std::pow(1.0 + mu, std::abs(q)) - 1.0) / mu, q));
  }
  return out;
}

namespace {

constexpr double kAmrCutoffHz = 3400.0;
constexpr std::size_t kMp3Block = 512;

Waveform proxy_amr(const Waveform& w, double strength) {
  const int bits = 8 - static_cast<int>(std::lround(4.0 * strength));
  return lowpass(mu_law_quantize(lowpass(w, kAmrCutoffHz), bits), kAmrCutoffHz);
}

Waveform proxy_mp3(const Waveform& w, double strength) {
  const double keep = 1.0 - 0.8 * strength;
  Waveform out = w;
  num::Dct dct(kMp3Block);
  std::vector<double> block(kMp3Block), coeffs(kMp3Block), recon(kMp3Block);
  std::vector<std::size_t> order(kMp3Block);
  for (std::size_t start = 0; start < w.samples.size(); start += kMp3Block) {
    const std::size_t len = std::min(kMp3Block, w.samples.size() - start);
    std::fill(block.begin(), block.end(), 0.0);
    for (std::size_t i = 0; i < len; ++i) block[i] = w.samples[start + i];
    dct.forward(block, coeffs);

    double total = 0.0;
    for (double c : coeffs) total += c * c;
    for (std::size_t i = 0; i < kMp3Block; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(coeffs[a]) > std::abs(coeffs[b]); });
    double kept = 0.0;
    std::size_t count = 0;
    while (count < kMp3Block && kept < keep * total) {
      const double c = coeffs[order[count++]];
      kept += c * c;
    }
    for (std::size_t i = count; i < kMp3Block; ++i) coeffs[order[i]] = 0.0;

    dct.inverse(coeffs, recon);
    for (std::size_t i = 0; i < len; ++i) out.samples[start + i] = static_cast<float>(recon[i]);
  }
  return out;
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

std::string shell_quote(const std::string& s) { return "'" + replace_all(s, "'", "'\\''") + "'"; }

}  // namespace

Waveform codec_proxy(const Waveform& w, Codec codec, double strength) {
  if (strength < 0.0 || strength > 1.0) throw InputError("codec strength must lie in [0, 1]");
  switch (codec) {
    case Codec::none: return w;
    case Codec::proxy_amr: return proxy_amr(w, strength);
    case Codec::proxy_mp3: return proxy_mp3(w, strength);
    case Codec::external: throw InputError("the external codec needs a command; use run_external_codec");
  }
  return w;
}

Waveform run_external_codec(const Waveform& w, const std::string& command_template) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("sigpointer-codec-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::create_directories(dir);
  const fs::path in = dir / "in.wav", out = dir / "out.wav", err = dir / "stderr.txt";
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};

  write_wav(in, w);
  std::string command = replace_all(command_template, "{in}", shell_quote(in.string()));
  command = replace_all(command, "{out}", shell_quote(out.string()));
  const int status = std::system(("( " + command + " ) 2> " + shell_quote(err.string()) + " > /dev/null").c_str());

  std::ifstream err_in(err);
  std::stringstream captured;
  captured << err_in.rdbuf();
  if (status != 0) {
    throw PostProcessError("external codec failed (status " + std::to_string(status) + "): " + captured.str());
  }
  Waveform result;
  try {
    result = read_wav(out);
  } catch (const std::exception& e) {
    throw PostProcessError(std::string("external codec produced no usable output: ") + e.what() + " " + captured.str());
  }
  if (result.sample_rate != w.sample_rate) throw PostProcessError("external codec changed the sample rate");
  // Encoders pad; keep the original length.
  result.samples.resize(w.samples.size(), 0.0f);
  return result;
}

Waveform apply_postprocessing(const Waveform& w, const PostProcSpec& spec, std::uint64_t seed) {
  spec.validate();
  Waveform out = spec.noise_snr_db ? add_noise(w, *spec.noise_snr_db, spec.noise_type, seed) : w;
  if (spec.codec == Codec::none) return out;
  for (int run = 0; run < spec.codec_runs; ++run)
    out = spec.codec == Codec::external ? run_external_codec(out, spec.external_command)
                                        : codec_proxy(out, spec.codec, spec.codec_strength);
  return out;
}

}  // namespace sigpointer::splicegen
