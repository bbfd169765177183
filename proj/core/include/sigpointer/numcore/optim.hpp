#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sigpointer/numcore/tensor.hpp"

namespace sigpointer::num {

/// Uniform Glorot/Xavier samples in +-sqrt(6 / (fan_in + fan_out)) for a 2-D shape
/// {fan_in, fan_out}.
template <typename T>
Tensor<T> glorot_init(const Shape& shape, std::uint64_t seed, bool requires_grad = true);

struct AdamHyper {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter tensor.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

/// One bias-corrected Adam update of `param` in place. `step` is the 1-based
/// update count after this step.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments& moments,
                 const AdamHyper& hyper, std::uint64_t step);

/// Adam over a fixed list of parameter tensors, reading their accumulated grads.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamHyper hyper);

  /// Applies one update; parameters without a gradient buffer are treated as
  /// having a zero gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_lr(double lr) { hyper_.lr = lr; }
  const std::vector<AdamMoments>& moments() const { return moments_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamMoments> moments_;
  AdamHyper hyper_;
  std::uint64_t step_count_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace sigpointer::num
