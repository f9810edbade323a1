#include <benchmark/benchmark.h>

#include <omp.h>

#include "vh/batch.hpp"
#include "vh/scenario.hpp"

using namespace vh;

namespace {

std::vector<sim::Scenario> corpus(std::size_t n) {
  std::vector<sim::Scenario> out;
  for (std::uint64_t seed = 1; seed <= n; ++seed) {
    auto s = sim::parse_scenario("[scenario]\nduration = 120s\n[tag 1]\ndefinition = tracker.tagdef\n"
                                 "[station 100]\nposition = 10 0\ndefault_intents = yes\n",
                                 VH_BENCH_DATA);
    s.seed = seed;
    s.tags[0].options.seed = sim::tag_seed(s, 1);
    s.tags[0].options.sensor_seed = sim::sensor_seed(s, 1);
    out.push_back(std::move(s));
  }
  return out;
}

void BM_run_scenarios(benchmark::State& state) {
  const auto in = corpus(16);
  const int jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(batch::run_scenarios(in, jobs, {.compact_trace = true}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.size()));
}

void BM_integrity_campaign(benchmark::State& state) {
  const int jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(batch::integrity_campaign(3, 2000, jobs));
  state.SetItemsProcessed(state.iterations() * 2000);
}

void job_counts(benchmark::internal::Benchmark* b) {
  for (int j : {1, 2, 4}) b->Arg(j);
  if (omp_get_max_threads() > 4) b->Arg(omp_get_max_threads());
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_run_scenarios)->Apply(job_counts);
BENCHMARK(BM_integrity_campaign)->Apply(job_counts);

BENCHMARK_MAIN();
