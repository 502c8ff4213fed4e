// Serial reference loops vs the chunked parallel kernels.

#include <benchmark/benchmark.h>

#include <random>

#include "mlfas/network.hpp"
#include "mlfas/reference.hpp"

namespace {

mlfas::Network dense_net() {
  mlfas::NetworkSpec spec;
  spec.input = {3, 16, 16};
  spec.hidden = {mlfas::LayerSpec::dense(128), mlfas::LayerSpec::dense(128)};
  spec.output_size = 256;
  return mlfas::make_network(spec, 1);
}

mlfas::Network conv_net() {
  mlfas::NetworkSpec spec;
  spec.input = {3, 16, 16};
  spec.hidden = {mlfas::LayerSpec::conv(8, 3, 1, 1), mlfas::LayerSpec::conv(8, 3, 2, 1), mlfas::LayerSpec::dense(64)};
  spec.output_size = 256;
  return mlfas::make_network(spec, 1);
}

mlfas::Minibatch batch_for(const mlfas::Network& net, long size) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  mlfas::Minibatch b{mlfas::BatchMatrix(static_cast<Eigen::Index>(net.input_size()), size),
                     mlfas::BatchMatrix(static_cast<Eigen::Index>(net.output_size()), size)};
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = u(rng);
  return b;
}

template <typename Fn>
void run(benchmark::State& state, const mlfas::Network& net, Fn fn) {
  const mlfas::Minibatch b = batch_for(net, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fn(net, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DenseGradientReference(benchmark::State& s) { run(s, dense_net(), mlfas::reference::gradient); }
void BM_DenseGradientParallel(benchmark::State& s) { run(s, dense_net(), mlfas::backward); }
void BM_ConvGradientReference(benchmark::State& s) { run(s, conv_net(), mlfas::reference::gradient); }
void BM_ConvGradientParallel(benchmark::State& s) { run(s, conv_net(), mlfas::backward); }
void BM_DenseForwardReference(benchmark::State& s) {
  run(s, dense_net(), [](const auto& n, const auto& b) { return mlfas::reference::forward_batch(n, b.inputs); });
}
void BM_DenseForwardParallel(benchmark::State& s) {
  run(s, dense_net(), [](const auto& n, const auto& b) { return mlfas::forward_batch(n, b.inputs); });
}

}  // namespace

BENCHMARK(BM_DenseGradientReference)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseGradientParallel)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvGradientReference)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvGradientParallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseForwardReference)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseForwardParallel)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
