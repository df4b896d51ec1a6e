#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "fern/generators.hpp"
#include "fern/metrics.hpp"
#include "fern/model.hpp"
#include "fern/rng.hpp"
#include "fern/tape.hpp"
#include "fern/tensor.hpp"

namespace {

using fern::num::Tape;
using fern::num::Tensor;
namespace model = fern::model;

model::FernConfig bench_config(std::size_t reflections) {
  model::FernConfig config;
  config.context_len = 96;
  config.horizon = 96;
  config.patch = 24;
  config.reflections = reflections;
  config.hidden = 64;
  config.encoder_layers = 5;
  config.decoder_steps = 2;
  return config;
}

struct BenchInputs {
  Tensor x;
  Tensor z0;
  Tensor y0;
};

BenchInputs bench_inputs(const model::FernConfig& config, std::size_t rows) {
  fern::rng::Stream stream(99);
  BenchInputs in;
  in.x = model::draw_noise(stream, rows, config.context_len, 1.0);
  in.z0 = model::draw_noise(stream, rows, config.latent_dim(),
                            config.noise_scale);
  in.y0 = model::draw_noise(stream, rows, config.horizon,
                            config.noise_scale);
  return in;
}

// Forward cost as a function of the reflection count; the transport factor
// dominates once the encoder is fixed.
void BM_ForwardReflections(benchmark::State& state) {
  const model::FernConfig config(
      bench_config(static_cast<std::size_t>(state.range(0))));
  const model::FernParameters params =
      model::init_parameters(config, fern::rng::Stream(7).split("init"));
  const BenchInputs in = bench_inputs(config, 32);
  for (auto _ : state) {
    Tape tape;
    const model::BoundParameters bound =
        model::bind_parameters(tape, params);
    const model::ForwardResult r =
        model::forward(tape, bound, config, in.x, in.z0, in.y0);
    benchmark::DoNotOptimize(tape.value(r.prediction).data());
  }
}
BENCHMARK(BM_ForwardReflections)->Arg(2)->Arg(8)->Arg(24);

void BM_ForwardBackward(benchmark::State& state) {
  const model::FernConfig config(bench_config(8));
  const model::FernParameters params =
      model::init_parameters(config, fern::rng::Stream(7).split("init"));
  const BenchInputs in = bench_inputs(config, 32);
  for (auto _ : state) {
    Tape tape;
    const model::BoundParameters bound =
        model::bind_parameters(tape, params);
    const model::ForwardResult r =
        model::forward(tape, bound, config, in.x, in.z0, in.y0);
    const Tape::Id loss = tape.huber(r.prediction, tape.input(in.y0), 1.0);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(bound.all.front()).data());
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_Rk4Lorenz(benchmark::State& state) {
  fern::gen::SystemSpec spec;
  spec.system = fern::gen::SystemKind::kLorenz63;
  spec.dt = 0.01;
  spec.steps = static_cast<std::size_t>(state.range(0));
  spec.params = {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
  spec.initial_cond = {1.0, 1.0, 1.0};
  for (auto _ : state) {
    const fern::gen::Trajectory traj = fern::gen::simulate(spec);
    benchmark::DoNotOptimize(traj.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rk4Lorenz)->Arg(1000)->Arg(10000);

void BM_W2Sorted(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  fern::rng::Stream stream(5);
  std::vector<double> a(n);
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = stream.normal();
    b[i] = stream.normal();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fern::metrics::w2_1d(a, b));
  }
}
BENCHMARK(BM_W2Sorted)->Arg(96)->Arg(720);

void BM_Swd(benchmark::State& state) {
  const std::size_t projections = static_cast<std::size_t>(state.range(0));
  fern::rng::Stream stream(6);
  const Tensor preds = model::draw_noise(stream, 64, 96, 1.0);
  const Tensor truths = model::draw_noise(stream, 64, 96, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        fern::metrics::swd(preds, truths, projections, 101));
  }
}
BENCHMARK(BM_Swd)->Arg(32)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
