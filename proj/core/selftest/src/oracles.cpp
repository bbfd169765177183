#include "sigpointer/selftest/oracles.hpp"

#include <bit>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sigpointer/numcore/random.hpp"

namespace sigpointer::oracle {

using num::Tensor;

GradCheck check_gradients(const ScalarFn& f, std::span<const Tensor<double>> inputs, double h) {
  for (auto t : inputs) t.zero_grad();
  f(inputs).backward();

  GradCheck out;
  for (auto t : inputs) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.size());
    {
      num::NoGradGuard no_grad;
      auto data = t.mutable_data();
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double orig = data[i];
        data[i] = orig + h;
        const double up = f(inputs).item();
        data[i] = orig - h;
        const double down = f(inputs).item();
        data[i] = orig;
        numeric[i] = (up - down) / (2 * h);
      }
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    // Gradients that vanish analytically (e.g. attention key biases) leave only
    // finite-difference noise, so tiny norms are compared absolutely.
    const double scale = std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
    const double rel = std::sqrt(diff) / scale;
    out.max_rel_error = std::max(out.max_rel_error, rel);
    out.checked += t.size();
  }
  return out;
}

Tensor<double> random_leaf(std::size_t rows, std::size_t cols, std::uint64_t seed, bool requires_grad) {
  num::Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor<double>({rows, cols}, std::move(v), requires_grad);
}

std::uint32_t to_mask(std::span<const std::size_t> indices) {
  std::uint32_t m = 0;
  for (auto i : indices) m |= 1u << i;
  return m;
}

std::vector<std::size_t> from_mask(std::uint32_t mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < 32; ++i)
    if (mask & (1u << i)) out.push_back(i);
  return out;
}

std::uint32_t bin_mask(std::uint32_t mask, std::size_t f) {
  std::uint32_t out = 0;
  for (std::size_t i = 0; i < 32; ++i)
    if (mask & (1u << i)) out |= 1u << (i / f);
  return out;
}

double jaccard_mask(std::uint32_t p, std::uint32_t t) {
  const int u = std::popcount(p | t);
  return u == 0 ? 1.0 : static_cast<double>(std::popcount(p & t)) / u;
}

double recall_mask(std::uint32_t p, std::uint32_t t) {
  const int n = std::popcount(t);
  if (n == 0) return p == 0 ? 1.0 : 0.0;
  return static_cast<double>(std::popcount(p & t)) / n;
}

std::vector<std::complex<double>> direct_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
    out[k] = acc;
  }
  return out;
}

std::vector<double> direct_dct2(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::cos(std::numbers::pi * k * (2.0 * t + 1.0) / (2.0 * n));
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

double adam_first_step(double grad, double lr, double beta1, double beta2, double eps) {
  const double m = (1 - beta1) * grad, v = (1 - beta2) * grad * grad;
  const double m_hat = m / (1 - beta1), v_hat = v / (1 - beta2);
  return -lr * m_hat / (std::sqrt(v_hat) + eps);
}

std::vector<std::size_t> boundary_time_labels(std::span<const double> segment_seconds, double block_seconds) {
  std::vector<std::size_t> out;
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < segment_seconds.size(); ++i) {
    t += segment_seconds[i];
    const auto label = static_cast<std::size_t>(std::floor(t / block_seconds + 1e-9));
    if (out.empty() || out.back() != label) out.push_back(label);
  }
  return out;
}

std::vector<double> sinusoid_row(std::size_t position, std::size_t dim) {
  std::vector<double> row(dim);
  for (std::size_t pair = 0; 2 * pair < dim; ++pair) {
    const double freq = 1.0 / std::pow(10000.0, 2.0 * pair / dim);
    row[2 * pair] = std::sin(position * freq);
    if (2 * pair + 1 < dim) row[2 * pair + 1] = std::cos(position * freq);
  }
  return row;
}

}  // namespace sigpointer::oracle
