#include <benchmark/benchmark.h>

#include "lidcd/harness.hpp"

using namespace lidcd;
using namespace lidcd::ad;

namespace {

void BM_matmul(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  RngStream rng(1);
  std::vector<double> av(static_cast<std::size_t>(m) * k), bv(static_cast<std::size_t>(k) * n);
  for (double& v : av) v = rng.normal();
  for (double& v : bv) v = rng.normal();
  for (auto _ : state) {
    Tape tape;
    Tensor a = tape.leaf(m, k, av);
    Tensor b = tape.leaf(k, n, bv);
    Tensor loss = sum(matmul(a, b));
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<std::int64_t>(m) * k * n);
}
BENCHMARK(BM_matmul)->Args({1024, 32, 32})->Args({8000, 32, 264})->Args({8000, 12, 32});

void BM_trace_expm(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  RngStream rng(2);
  std::vector<double> mv(static_cast<std::size_t>(d) * d);
  for (double& v : mv) v = rng.uniform(0.0, 0.4);
  for (auto _ : state) {
    Tape tape;
    Tensor m = tape.leaf(d, d, mv);
    Tensor f = trace_expm(m);
    tape.backward(f);
    benchmark::DoNotOptimize(f.scalar());
  }
}
BENCHMARK(BM_trace_expm)->Arg(10)->Arg(20)->Arg(30);

void BM_loss_step(benchmark::State& state) {
  // Full latent-variant loss forward+backward on a d=10 linear instance.
  const int B = static_cast<int>(state.range(0));
  ExperimentConfig cfg;
  cfg.d = 10;
  cfg.e = 1.0;
  cfg.n = B;
  const Dataset ds = generate_dataset(cfg, 3);

  ParamStore store;
  RngStream init(4, 1);
  ModelState model{
      GraphPosterior(store, cfg.d, init),
      InterventionPosterior(store, DppPrior{9.0, -0.01, 264, 11}, cfg.d, true, 32, 2, 0.1,
                            init),
      DensityModel(store, DensityConfig{DensityFamily::Linear, cfg.d, 264, 32, 2, 0.1, 2, 12,
                                        1e-3},
                   init),
  };
  LossOptions opts;
  opts.variant = Variant::Latent;
  opts.dataset_size = B;
  AlState al;
  std::uint64_t step = 0;
  for (auto _ : state) {
    ++step;
    Tape tape;
    EvalCtx ctx(tape, store, true, 4, step);
    Tensor X = tape.constant(ds.n, ds.d, ds.X);
    BatchView bv;
    bv.X = &X;
    RngStream rng(4, step);
    LossResult res = build_loss(ctx, bv, model, al, opts, rng);
    tape.backward(res.total);
    benchmark::DoNotOptimize(res.parts.total);
  }
}
BENCHMARK(BM_loss_step)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
