#include <benchmark/benchmark.h>

#include <random>

#include "neuromax/dataflow.hpp"
#include "neuromax/grid.hpp"
#include "neuromax/pe_core.hpp"
#include "neuromax/verify.hpp"

using namespace neuromax;

namespace {

const ThreadLut& lut() {
  static const ThreadLut l = ThreadLut::build(QuantParams{});
  return l;
}

void BM_ThreadMultiply(benchmark::State& st) {
  std::mt19937_64 rng(1);
  std::vector<LogCode> w, a;
  for (int i = 0; i < 1024; ++i) {
    w.push_back(LogCode::of(static_cast<int>(rng() % 40) - 24, rng() & 1));
    a.push_back(LogCode::of(static_cast<int>(rng() % 20) - 12));
  }
  std::size_t i = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(thread_multiply(w[i & 1023], a[(i * 7) & 1023], lut()));
    ++i;
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()));
}
BENCHMARK(BM_ThreadMultiply);

void BM_MatrixCompute(benchmark::State& st) {
  MatrixInputs in;
  MatrixWeights w;
  for (int i = 0; i < kPesPerMatrix; ++i) {
    in[i] = LogCode::of(i % 7 - 3);
    w[i] = {LogCode::of(-2), LogCode::of(-1, true), LogCode::of(1)};
  }
  for (auto _ : st) benchmark::DoNotOptimize(adder_net0(matrix_compute(in, w, lut())));
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()) * kThreadsPerMatrix);
}
BENCHMARK(BM_MatrixCompute);

void BM_PlanLayer(benchmark::State& st) {
  const LayerConfig cfg{3, 1, 58, 58, 128, 256};
  for (auto _ : st) benchmark::DoNotOptimize(plan_layer(cfg).cycle_count());
}
BENCHMARK(BM_PlanLayer);

void BM_ExecuteLayer(benchmark::State& st) {
  const LayerConfig cfg{3, 1, 30, 30, 16, 16};
  std::mt19937_64 rng(2);
  const auto in = random_codes(rng, cfg.input_shape(), false, -12, 6);
  const auto w = random_codes(rng, cfg.weight_shape(), true, -14, 3);
  CoreConfig cc;
  cc.parallel = st.range(0) != 0;
  const ConvCore core(cc);
  const Schedule s = plan_layer(cfg);
  for (auto _ : st) benchmark::DoNotOptimize(core.run_schedule(s, in, w).psums.size());
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * cfg.macs()));
}
BENCHMARK(BM_ExecuteLayer)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
