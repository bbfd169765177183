#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

struct fftw_plan_s;

namespace sigpointer::num {

/// Real-input forward DFT of fixed length n, returning n/2+1 bins.
/// Not thread-safe per instance; construct one per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// Input shorter than n is zero-padded.
  void forward(std::span<const double> input, std::vector<std::complex<double>>& out);

 private:
  std::size_t n_;
  double* in_ = nullptr;
  void* out_ = nullptr;
  fftw_plan_s* plan_ = nullptr;
};

/// Orthonormal DCT-II / DCT-III (its inverse) of fixed length n.
class Dct {
 public:
  explicit Dct(std::size_t n);
  ~Dct();
  Dct(const Dct&) = delete;
  Dct& operator=(const Dct&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<const double> input, std::span<double> out);
  void inverse(std::span<const double> input, std::span<double> out);

 private:
  std::size_t n_;
  double* buf_in_ = nullptr;
  double* buf_out_ = nullptr;
  fftw_plan_s* fwd_ = nullptr;
  fftw_plan_s* inv_ = nullptr;
};

}  // namespace sigpointer::num
