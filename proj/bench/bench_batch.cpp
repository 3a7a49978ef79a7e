// Serial vs OpenMP batch attack on the adversarially trained MLP fixture.

#include <benchmark/benchmark.h>

#include "fmn/attack.hpp"
#include "fmn/fixtures.hpp"

namespace {

const fmn::fixtures::MlpFixture& fixture() {
  static const auto f = fmn::fixtures::make_mlp_fixture(7, 16, 64);
  return f;
}

fmn::AttackConfig config() {
  fmn::AttackConfig cfg;
  cfg.iterations = 100;
  return cfg;
}

void BM_RunBatchSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto cfg = config();
  for (auto _ : state) {
    auto results = fmn::run_batch_serial(f.model, f.eval, cfg);
    benchmark::DoNotOptimize(results);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.eval.size()));
}
BENCHMARK(BM_RunBatchSerial)->Unit(benchmark::kMillisecond);

void BM_RunBatchParallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto cfg = config();
  const int jobs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto results = fmn::run_batch(f.model, f.eval, cfg, jobs);
    benchmark::DoNotOptimize(results);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(f.eval.size()));
}
BENCHMARK(BM_RunBatchParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
