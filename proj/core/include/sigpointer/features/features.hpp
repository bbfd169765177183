#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::features {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct FeatureConfig {
  int sample_rate = 16000;
  std::size_t win_len = 400;  // 25 ms
  std::size_t hop = 160;      // 10 ms
  // Zero-padded transform length. 400-sample frames only give 201 bins,
  // fewer than the mel bands, so the transform is padded to 2048.
  std::size_t n_fft = 2048;
  std::size_t n_mels = 238;
  std::size_t n_mfcc = 40;
  double block_seconds = 0.5;
  double min_seconds = 3.0;

  std::size_t feature_dim() const { return n_mels + n_mfcc + 1; }
  std::size_t block_samples() const;
  std::size_t hops_per_block() const;
  void validate() const;
};

/// Row-major [frames x bins] magnitudes.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> magnitude;
  int sample_rate = 16000;
  std::size_t n_fft = 0;

  double at(std::size_t f, std::size_t k) const { return magnitude[f * bins + k]; }
  std::span<const double> frame(std::size_t f) const { return {magnitude.data() + f * bins, bins}; }
};

/// Hann-windowed STFT magnitude. Frames start every `hop` samples while a full
/// window fits. n_fft = 0 means n_fft = win_len.
Spectrogram stft_magnitude(const Waveform& w, std::size_t win_len, std::size_t hop, std::size_t n_fft = 0);

std::vector<double> hann_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-mel filterbank stored as per-band weight runs over FFT bins.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin = 0.0, double fmax = -1.0);

  std::size_t bands() const { return first_.size(); }
  std::size_t bins() const { return bins_; }
  /// Dense weight of (band, bin).
  double weight(std::size_t band, std::size_t bin) const;
  /// log(1 + filterbank * power) for one spectrum of magnitudes.
  void apply(std::span<const double> magnitude, std::span<double> out) const;

 private:
  std::size_t bins_;
  std::vector<std::size_t> first_;
  std::vector<std::vector<double>> weights_;
};

/// Log-mel matrix [frames x n_mels] from a magnitude spectrogram.
std::vector<double> mel_spectrogram(const Spectrogram& spec, std::size_t n_mels = 238);

/// First n_coeff orthonormal DCT-II coefficients of each row of a [rows x n_mels] matrix.
std::vector<double> mfcc(std::span<const double> log_mel, std::size_t n_mels, std::size_t n_coeff = 40);

/// Per-frame magnitude-weighted mean frequency over Nyquist; 0 for silent frames.
std::vector<double> spectral_centroid(const Spectrogram& spec);

/// The continuous model input: N frames of dimension l.
struct FrameSequence {
  std::size_t n_frames = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major [N x dim]
  double frame_duration_s = 0.5;
  std::string source_id;

  std::span<const float> frame(std::size_t i) const { return {values.data() + i * dim, dim}; }
  template <typename T>
  num::Tensor<T> to_tensor() const {
    return num::Tensor<T>({n_frames, dim}, std::vector<T>(values.begin(), values.end()));
  }
  /// Rows [begin, end) as a new sequence.
  FrameSequence slice(std::size_t begin, std::size_t end) const;
};

/// Per-feature z-score statistics, fitted once on training data.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool fitted() const { return !mean.empty(); }
  static FeatureNormalizer fit(std::span<const FrameSequence> corpus);
  void apply(FrameSequence& seq) const;
};

/// Number of 500 ms blocks: floor(len / block_samples).
std::size_t frame_count(std::size_t samples, const FeatureConfig& config = {});

/// Un-normalised [mel | mfcc | centroid] block features of a waveform.
FrameSequence build_frame_sequence(const Waveform& w, const FeatureConfig& config = {},
                                   const FeatureNormalizer* normalizer = nullptr);

}  // namespace sigpointer::features
