#include "sigpointer/numcore/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "sigpointer/errors.hpp"

namespace sigpointer::num {

namespace {
// Planner calls are not thread-safe in FFTW; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw InputError("FFT length must be at least 2");
  std::lock_guard lock(planner_mutex());
  in_ = fftw_alloc_real(n);
  auto* out = fftw_alloc_complex(n / 2 + 1);
  out_ = out;
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan_);
  fftw_free(in_);
  fftw_free(out_);
}

void RealFft::forward(std::span<const double> input, std::vector<std::complex<double>>& out) {
  if (input.size() > n_) throw DimensionError("FFT input longer than transform length");
  std::copy(input.begin(), input.end(), in_);
  std::fill(in_ + input.size(), in_ + n_, 0.0);
  fftw_execute(plan_);
  const auto* c = static_cast<const fftw_complex*>(out_);
  out.resize(bins());
  for (std::size_t k = 0; k < bins(); ++k) out[k] = {c[k][0], c[k][1]};
}

Dct::Dct(std::size_t n) : n_(n) {
  if (n == 0) throw InputError("DCT length must be positive");
  std::lock_guard lock(planner_mutex());
  buf_in_ = fftw_alloc_real(n);
  buf_out_ = fftw_alloc_real(n);
  const int len = static_cast<int>(n);
  fwd_ = fftw_plan_r2r_1d(len, buf_in_, buf_out_, FFTW_REDFT10, FFTW_ESTIMATE);
  inv_ = fftw_plan_r2r_1d(len, buf_in_, buf_out_, FFTW_REDFT01, FFTW_ESTIMATE);
}

Dct::~Dct() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
  fftw_free(buf_in_);
  fftw_free(buf_out_);
}

// FFTW's REDFT10 is 2*sum x_n cos(pi k (2n+1) / 2N); scale to the orthonormal basis.
void Dct::forward(std::span<const double> input, std::span<double> out) {
  if (input.size() != n_ || out.size() != n_) throw DimensionError("DCT length mismatch");
  std::copy(input.begin(), input.end(), buf_in_);
  fftw_execute(fwd_);
  const double s0 = std::sqrt(1.0 / (4.0 * n_)), s = std::sqrt(1.0 / (2.0 * n_));
  for (std::size_t k = 0; k < n_; ++k) out[k] = buf_out_[k] * (k == 0 ? s0 : s);
}

void Dct::inverse(std::span<const double> input, std::span<double> out) {
  if (input.size() != n_ || out.size() != n_) throw DimensionError("DCT length mismatch");
  const double s0 = std::sqrt(1.0 / n_), s = std::sqrt(2.0 / n_);
  // REDFT01 computes X_0 + 2 sum_{k>0} X_k cos(...); undo the factor 2 on k>0.
  buf_in_[0] = input[0] * s0;
  for (std::size_t k = 1; k < n_; ++k) buf_in_[k] = input[k] * s * 0.5;
  fftw_execute(inv_);
  std::copy(buf_out_, buf_out_ + n_, out.begin());
}

}  // namespace sigpointer::num
