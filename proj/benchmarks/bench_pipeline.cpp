#include <benchmark/benchmark.h>

#include "sigpointer/features/features.hpp"
#include "sigpointer/model/checkpoint.hpp"
#include "sigpointer/numcore/random.hpp"
#include "sigpointer/splicegen/synth.hpp"

using namespace sigpointer;

namespace {

features::Waveform utterance(double seconds) {
  num::Rng rng(11);
  return splicegen::synth_utterance(splicegen::SyntheticSpeaker::random(rng), 11, seconds);
}

void BM_Synthesis(benchmark::State& state) {
  num::Rng rng(11);
  const auto speaker = splicegen::SyntheticSpeaker::random(rng);
  for (auto _ : state) benchmark::DoNotOptimize(splicegen::synth_utterance(speaker, 3, 10.0).samples.data());
}
BENCHMARK(BM_Synthesis)->Unit(benchmark::kMillisecond);

void BM_Features(benchmark::State& state) {
  const auto w = utterance(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(features::build_frame_sequence(w).values.data());
}
BENCHMARK(BM_Features)->Arg(10)->Arg(45)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const model::AnyModel m(state.range(1) ? model::ModelConfig::transformer_encoder_baseline()
                                         : model::ModelConfig::sigpointer_star(),
                          1);
  const auto frames = features::build_frame_sequence(utterance(state.range(0) / 2.0)).to_tensor<float>();
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(frames));
}
BENCHMARK(BM_Predict)->Args({20, 0})->Args({90, 0})->Args({90, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
