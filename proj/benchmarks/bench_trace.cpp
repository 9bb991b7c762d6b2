#include <nashverify/harness.hpp>

#include <benchmark/benchmark.h>

using namespace nashverify;

namespace {

Pipeline synthetic(std::size_t instances) {
  Pipeline p;
  p.instances = make_synthetic_instances(instances, 3, 3, 1);
  p.generator = std::make_shared<ScriptedGenerator>();
  for (const char* name : {"visual", "logical", "contextual"}) {
    JudgeSpec spec;
    spec.name = name;
    spec.kind = JudgeKind::Synthetic;
    p.judges.push_back(make_judge(spec, JudgeResources{.seed = 1}));
  }
  return p;
}

void BM_SyntheticTrace(benchmark::State& state) {
  const Pipeline p = synthetic(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trace(*p.generator, p.judges, p.lambdas, p.instances[0], p.options));
  }
}
BENCHMARK(BM_SyntheticTrace);

void BM_Decomposition(benchmark::State& state) {
  const Pipeline p = synthetic(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_decomposition(kAllStrategies, p, 1));
}
BENCHMARK(BM_Decomposition)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
