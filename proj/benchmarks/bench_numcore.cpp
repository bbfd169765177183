#include <benchmark/benchmark.h>

#include "sigpointer/numcore/ops.hpp"
#include "sigpointer/numcore/random.hpp"

using namespace sigpointer;
using num::Tensor;

namespace {

Tensor<float> random(std::size_t rows, std::size_t cols, std::uint64_t seed, bool grad = false) {
  num::Rng rng(seed);
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return Tensor<float>({rows, cols}, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random(n, 279, 1), b = random(279, 279, 2);
  num::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(num::matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * n * 279 * 279);
}
BENCHMARK(BM_Matmul)->Arg(20)->Arg(90)->Arg(64 * 20);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random(n, 279, 1, true), b = random(279, 279, 2, true);
  for (auto _ : state) {
    auto loss = num::sum(num::matmul(a, b));
    loss.backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(90);

void BM_Attention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto q = random(n, 279, 3), k = random(n, 279, 4), v = random(n, 279, 5);
  const std::vector<std::size_t> offsets{0, n};
  num::AttentionOptions o;
  o.heads = 9;
  num::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(num::multi_head_attention(q, k, v, offsets, offsets, o).data().data());
}
BENCHMARK(BM_Attention)->Arg(20)->Arg(90);

void BM_LayerNorm(benchmark::State& state) {
  const auto x = random(90, 279, 6);
  const auto g = Tensor<float>::full({1, 279}, 1.0f), b = Tensor<float>::zeros({1, 279});
  num::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(num::layer_norm(x, g, b).data().data());
}
BENCHMARK(BM_LayerNorm);

}  // namespace
