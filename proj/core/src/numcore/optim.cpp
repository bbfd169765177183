#include "sigpointer/numcore/optim.hpp"

#include <cmath>

#include "sigpointer/errors.hpp"
#include "sigpointer/numcore/random.hpp"

namespace sigpointer::num {

template <typename T>
Tensor<T> glorot_init(const Shape& shape, std::uint64_t seed, bool requires_grad) {
  if (shape.size() != 2) throw DimensionError("glorot_init: expected a 2-D shape, got " + shape_string(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
  Rng rng(seed);
  std::vector<T> values(shape[0] * shape[1]);
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(shape, std::move(values), requires_grad);
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamMoments& moments,
                 const AdamHyper& hyper, std::uint64_t step) {
  if (grad.size() != param.size()) throw DimensionError("adam_update: gradient size mismatch");
  if (moments.first.size() != param.size()) {
    moments.first.assign(param.size(), 0.0);
    moments.second.assign(param.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    param[i] = static_cast<T>(param[i] - hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamHyper hyper)
    : params_(std::move(params)), moments_(params_.size()), hyper_(hyper) {}

template <typename T>
void Adam<T>::step() {
  ++step_count_;
  std::vector<T> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (p.has_grad()) {
      adam_update<T>(p.mutable_data(), p.grad(), moments_[i], hyper_, step_count_);
    } else {
      zeros.assign(p.size(), T{0});
      adam_update<T>(p.mutable_data(), zeros, moments_[i], hyper_, step_count_);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template Tensor<float> glorot_init(const Shape&, std::uint64_t, bool);
template Tensor<double> glorot_init(const Shape&, std::uint64_t, bool);
template void adam_update(std::span<float>, std::span<const float>, AdamMoments&, const AdamHyper&,
                          std::uint64_t);
template void adam_update(std::span<double>, std::span<const double>, AdamMoments&, const AdamHyper&,
                          std::uint64_t);
template class Adam<float>;
template class Adam<double>;

}  // namespace sigpointer::num
