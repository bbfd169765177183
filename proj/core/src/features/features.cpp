#include "sigpointer/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/fft.hpp"

namespace sigpointer::features {

std::size_t FeatureConfig::block_samples() const {
  return static_cast<std::size_t>(std::lround(block_seconds * sample_rate));
}

std::size_t FeatureConfig::hops_per_block() const { return block_samples() / hop; }

void FeatureConfig::validate() const {
  if (sample_rate <= 0 || win_len == 0 || hop == 0) throw InputError("invalid STFT parameters");
  if (n_fft < win_len) throw InputError("n_fft must be at least the window length");
  if (n_mels >= n_fft / 2 + 1) throw InputError("n_mels must be below the number of FFT bins");
  if (n_mfcc > n_mels) throw InputError("n_mfcc must not exceed n_mels");
  if (block_samples() % hop != 0) throw InputError("block length must be a multiple of the hop");
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  // periodic Hann, the usual STFT choice
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Spectrogram stft_magnitude(const Waveform& w, std::size_t win_len, std::size_t hop, std::size_t n_fft) {
  if (n_fft == 0) n_fft = win_len;
  if (win_len == 0 || hop == 0 || n_fft < win_len) throw InputError("invalid STFT parameters");
  if (w.samples.size() < win_len) {
    throw InputError("waveform of " + std::to_string(w.samples.size()) + " samples is shorter than one " +
                     std::to_string(win_len) + "-sample window");
  }
  Spectrogram spec;
  spec.frames = (w.samples.size() - win_len) / hop + 1;
  spec.bins = n_fft / 2 + 1;
  spec.sample_rate = w.sample_rate;
  spec.n_fft = n_fft;
  spec.magnitude.resize(spec.frames * spec.bins);

  const auto window = hann_window(win_len);
  num::RealFft fft(n_fft);
  std::vector<double> frame(win_len);
  std::vector<std::complex<double>> bins;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const float* x = w.samples.data() + f * hop;
    for (std::size_t i = 0; i < win_len; ++i) frame[i] = x[i] * window[i];
    fft.forward(frame, bins);
    for (std::size_t k = 0; k < spec.bins; ++k) spec.magnitude[f * spec.bins + k] = std::abs(bins[k]);
  }
  return spec;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate, double fmin, double fmax)
    : bins_(n_fft / 2 + 1) {
  if (fmax < 0) fmax = sample_rate / 2.0;
  if (n_mels == 0 || n_mels >= bins_) throw InputError("n_mels must lie in [1, number of FFT bins)");
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));

  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  first_.resize(n_mels);
  weights_.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    std::size_t first = bins_;
    std::vector<double> run;
    for (std::size_t k = 0; k < bins_; ++k) {
      const double f = k * bin_hz;
      double wgt = 0.0;
      if (f > left && f < right) wgt = f <= centre ? (f - left) / (centre - left) : (right - f) / (right - centre);
      if (wgt > 0.0) {
        if (first == bins_) first = k;
        run.resize(k - first + 1, 0.0);
        run[k - first] = wgt;
      }
    }
    if (run.empty()) throw InputError("mel band " + std::to_string(m) + " covers no FFT bin; raise n_fft");
    first_[m] = first;
    weights_[m] = std::move(run);
  }
}

double MelFilterbank::weight(std::size_t band, std::size_t bin) const {
  const std::size_t first = first_.at(band);
  const auto& run = weights_[band];
  return bin >= first && bin < first + run.size() ? run[bin - first] : 0.0;
}

void MelFilterbank::apply(std::span<const double> magnitude, std::span<double> out) const {
  if (magnitude.size() != bins_ || out.size() != bands()) throw DimensionError("mel filterbank size mismatch");
  for (std::size_t m = 0; m < bands(); ++m) {
    double acc = 0.0;
    const auto& run = weights_[m];
    for (std::size_t i = 0; i < run.size(); ++i) {
      const double mag = magnitude[first_[m] + i];
      acc += run[i] * mag * mag;
    }
    out[m] = std::log1p(acc);
  }
}

std::vector<double> mel_spectrogram(const Spectrogram& spec, std::size_t n_mels) {
  MelFilterbank bank(n_mels, spec.n_fft, spec.sample_rate);
  std::vector<double> out(spec.frames * n_mels);
  for (std::size_t f = 0; f < spec.frames; ++f) bank.apply(spec.frame(f), {out.data() + f * n_mels, n_mels});
  return out;
}

std::vector<double> mfcc(std::span<const double> log_mel, std::size_t n_mels, std::size_t n_coeff) {
  if (n_coeff > n_mels) throw InputError("n_coeff must not exceed n_mels");
  if (n_mels == 0 || log_mel.size() % n_mels != 0) throw DimensionError("log-mel matrix has ragged rows");
  const std::size_t rows = log_mel.size() / n_mels;
  num::Dct dct(n_mels);
  std::vector<double> full(n_mels), out(rows * n_coeff);
  for (std::size_t r = 0; r < rows; ++r) {
    dct.forward(log_mel.subspan(r * n_mels, n_mels), full);
    std::copy_n(full.begin(), n_coeff, out.begin() + r * n_coeff);
  }
  return out;
}

std::vector<double> spectral_centroid(const Spectrogram& spec) {
  std::vector<double> out(spec.frames, 0.0);
  const double nyquist = spec.sample_rate / 2.0;
  const double bin_hz = static_cast<double>(spec.sample_rate) / spec.n_fft;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < spec.bins; ++k) {
      num += k * bin_hz * spec.at(f, k);
      den += spec.at(f, k);
    }
    out[f] = den > 0.0 ? num / den / nyquist : 0.0;
  }
  return out;
}

FrameSequence FrameSequence::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_frames) throw DimensionError("frame slice out of range");
  FrameSequence out;
  out.n_frames = end - begin;
  out.dim = dim;
  out.frame_duration_s = frame_duration_s;
  out.source_id = source_id;
  out.values.assign(values.begin() + begin * dim, values.begin() + end * dim);
  return out;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FrameSequence> corpus) {
  if (corpus.empty()) throw DataError("cannot fit feature statistics on an empty corpus");
  const std::size_t dim = corpus.front().dim;
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  std::size_t count = 0;
  for (const auto& seq : corpus) {
    if (seq.dim != dim) throw DimensionError("feature dimension differs across the corpus");
    for (std::size_t i = 0; i < seq.n_frames; ++i) {
      const auto row = seq.frame(i);
      for (std::size_t d = 0; d < dim; ++d) {
        sum[d] += row[d];
        sq[d] += static_cast<double>(row[d]) * row[d];
      }
    }
    count += seq.n_frames;
  }
  if (count == 0) throw DataError("cannot fit feature statistics on zero frames");
  FeatureNormalizer n;
  n.mean.resize(dim);
  n.stddev.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    n.mean[d] = sum[d] / count;
    const double var = std::max(0.0, sq[d] / count - n.mean[d] * n.mean[d]);
    n.stddev[d] = var > 1e-12 ? std::sqrt(var) : 1.0;
    // f32-representable so checkpointed statistics reproduce training exactly
    n.mean[d] = static_cast<float>(n.mean[d]);
    n.stddev[d] = static_cast<float>(n.stddev[d]);
  }
  return n;
}

void FeatureNormalizer::apply(FrameSequence& seq) const {
  if (seq.dim != mean.size()) throw DimensionError("normaliser dimension does not match the features");
  for (std::size_t i = 0; i < seq.n_frames; ++i)
    for (std::size_t d = 0; d < seq.dim; ++d) {
      auto& v = seq.values[i * seq.dim + d];
      v = static_cast<float>((v - mean[d]) / stddev[d]);
    }
}

std::size_t frame_count(std::size_t samples, const FeatureConfig& config) {
  return samples / config.block_samples();
}

FrameSequence build_frame_sequence(const Waveform& w, const FeatureConfig& config,
                                   const FeatureNormalizer* normalizer) {
  config.validate();
  if (w.sample_rate != config.sample_rate) {
    throw InputError("expected " + std::to_string(config.sample_rate) + " Hz audio, got " +
                     std::to_string(w.sample_rate) + " Hz");
  }
  if (w.duration() + 1e-9 < config.min_seconds) {
    throw InputError("waveform of " + std::to_string(w.duration()) + " s is shorter than the minimum of " +
                     std::to_string(config.min_seconds) + " s");
  }
  const std::size_t n = frame_count(w.samples.size(), config);
  if (n == 0) throw InputError("waveform shorter than one block");
  const std::size_t per_block = config.hops_per_block();

  // Sub-frame j covers [j*hop, j*hop + win); block b owns sub-frames [b*per_block, (b+1)*per_block).
  // Zero-pad the tail so the last block's windows fit.
  Waveform padded;
  padded.sample_rate = w.sample_rate;
  const std::size_t needed = (n * per_block - 1) * config.hop + config.win_len;
  padded.samples.assign(needed, 0.0f);
  std::copy_n(w.samples.begin(), std::min(needed, w.samples.size()), padded.samples.begin());

  const auto spec = stft_magnitude(padded, config.win_len, config.hop, config.n_fft);
  const auto centroid = spectral_centroid(spec);
  MelFilterbank bank(config.n_mels, config.n_fft, config.sample_rate);
  num::Dct dct(config.n_mels);

  FrameSequence out;
  out.n_frames = n;
  out.dim = config.feature_dim();
  out.frame_duration_s = config.block_seconds;
  out.values.resize(n * out.dim);

  std::vector<double> mel(config.n_mels), mel_mean(config.n_mels), coeffs(config.n_mels);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(mel_mean.begin(), mel_mean.end(), 0.0);
    double centroid_mean = 0.0;
    for (std::size_t j = b * per_block; j < (b + 1) * per_block; ++j) {
      bank.apply(spec.frame(j), mel);
      for (std::size_t m = 0; m < config.n_mels; ++m) mel_mean[m] += mel[m];
      centroid_mean += centroid[j];
    }
    for (auto& m : mel_mean) m /= per_block;
    centroid_mean /= per_block;
    // DCT is linear, so the MFCC of the block-mean log-mel equals the block mean of sub-frame MFCCs.
    dct.forward(mel_mean, coeffs);

    float* row = out.values.data() + b * out.dim;
    for (std::size_t m = 0; m < config.n_mels; ++m) row[m] = static_cast<float>(mel_mean[m]);
    for (std::size_t c = 0; c < config.n_mfcc; ++c) row[config.n_mels + c] = static_cast<float>(coeffs[c]);
    row[config.n_mels + config.n_mfcc] = static_cast<float>(centroid_mean);
  }
  if (normalizer) normalizer->apply(out);
  return out;
}

}  // namespace sigpointer::features
