#include <benchmark/benchmark.h>

#include <random>

#include "reldepth/align.hpp"
#include "reldepth/flow.hpp"
#include "reldepth/losses.hpp"
#include "reldepth/model.hpp"
#include "reldepth/synth.hpp"

using namespace reldepth;

namespace {

Size2 square(const benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  return {n, n};
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> x(16 * n * n), w(16 * 16 * 9);
  for (double& v : x) v = g(rng);
  for (double& v : w) v = g(rng);
  const Tensor in = Tensor::from({16, n, n}, x);
  const Tensor weights = Tensor::from({16, 16, 3, 3}, w, true);
  const Tensor bias = Tensor::zeros({16}, true);
  for (auto _ : state) {
    Tensor y = sum(conv2d(in, weights, bias));
    backward(y);
    benchmark::DoNotOptimize(weights.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(32)->Arg(64);

void BM_NetworkPredict(benchmark::State& state) {
  const DepthNet net(1);
  const Image im(3, square(state), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(im));
}
BENCHMARK(BM_NetworkPredict)->Arg(32)->Arg(64);

void BM_Render(benchmark::State& state) {
  const Size2 size = square(state);
  const Scene scene = Scene::random(3);
  const Camera cam = Camera::centered(static_cast<double>(size.width), size);
  for (auto _ : state) benchmark::DoNotOptimize(render(scene, cam, size));
}
BENCHMARK(BM_Render)->Arg(32)->Arg(128);

struct FlowPair {
  FlowField ab, ba;
};

FlowPair flows(Size2 size) {
  const Scene scene = Scene::random(4);
  const Camera a = Camera::centered(static_cast<double>(size.width), size);
  const Camera b = Camera::centered(static_cast<double>(size.width), size, {0.05, 0.02, 0.03});
  return {analytic_flow(scene, a, b, size).flow, analytic_flow(scene, b, a, size).flow};
}

void BM_CorrespondenceMask(benchmark::State& state) {
  const FlowPair f = flows(square(state));
  for (auto _ : state) benchmark::DoNotOptimize(correspondence_mask(f.ab, f.ba, MaskConfig{}));
}
BENCHMARK(BM_CorrespondenceMask)->Arg(64)->Arg(256);

void BM_WarpImage(benchmark::State& state) {
  const Size2 size = square(state);
  const FlowPair f = flows(size);
  const Image im(3, size, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(warp(f.ab, im));
}
BENCHMARK(BM_WarpImage)->Arg(64)->Arg(256);

void BM_Ssimae(benchmark::State& state) {
  const Size2 size = square(state);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  DepthMap pred(size), gt(size);
  for (std::size_t i = 0; i < size.area(); ++i) {
    pred.values[i] = u(rng);
    gt.values[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ssimae(pred, gt));
}
BENCHMARK(BM_Ssimae)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
