#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mcrood/model.hpp"
#include "mcrood/radar_dsp.hpp"
#include "mcrood/respd.hpp"
#include "mcrood/synthgen.hpp"
#include "mcrood/trainer.hpp"

using namespace mcrood;

namespace {

nn::Tensor<float> random_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  nn::Tensor<float> x({n, 1, side, side});
  for (auto& v : x.data()) v = u(rng);
  return x;
}

void BM_MakeRdi(benchmark::State& state) {
  const dsp::RadarConfig cfg;
  synth::SceneSpec spec;
  spec.scenario = synth::Scenario::walk;
  spec.seed = 3;
  synth::SceneSimulator sim(spec, cfg);
  const auto frame = sim.next();
  dsp::MtiState mti;
  for (auto _ : state) benchmark::DoNotOptimize(dsp::make_rdi(frame, mti, cfg));
}
BENCHMARK(BM_MakeRdi)->Unit(benchmark::kMillisecond);

void BM_SimulateFrame(benchmark::State& state) {
  const dsp::RadarConfig cfg;
  synth::SceneSpec spec;
  spec.scenario = synth::Scenario::walk;
  spec.n_frames = 1u << 30;
  synth::SceneSimulator sim(spec, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(sim.next());
}
BENCHMARK(BM_SimulateFrame)->Unit(benchmark::kMillisecond);

void BM_RespdPush(benchmark::State& state) {
  const auto window = static_cast<std::size_t>(state.range(0));
  respd::RespdStream stream(window);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto img = dsp::RangeDopplerImage::zeros(64, 64);
  for (double& v : img.data) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(stream.push(img));
}
BENCHMARK(BM_RespdPush)->Arg(1)->Arg(50);

void BM_Inference(benchmark::State& state) {
  const MultiDecoderModel<float> model(ModelConfig{}, 5);
  const auto x = random_images(static_cast<std::size_t>(state.range(0)), 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(model.reconstruction_errors_batch(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Inference)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  MultiDecoderModel<float> model(ModelConfig{}, 7);
  Optimizer<float> opt{TrainConfig{}};
  std::vector<nn::Tensor<float>> batches;
  for (std::size_t c = 0; c < model.num_classes(); ++c) batches.push_back(random_images(16, 64, 8 + c));
  for (auto _ : state) {
    benchmark::DoNotOptimize(multi_class_loss<float>(model, batches));
    opt.step(model.params());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
