#include <benchmark/benchmark.h>

#include "lwr/analysis.hpp"

using namespace lwr;

namespace {

SystemParams params(int n) {
  SystemParams p;
  p.n = n;
  p.initial_means = {2.0};
  p.seed = 17;
  return p;
}

void BM_TransitionBundle(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto s = make_random_schedule(n, 3, 0.3, 5);
  const Graph g = s.graph_at(0);
  const Matrix a = adjacency_matrix(g);
  const Matrix d = degree_of(g).as_matrix();
  const Matrix p = PrecisionLedger(n, 1.0).as_matrix();
  for (auto _ : state) benchmark::DoNotOptimize(transition_bundle(a, d, p));
}
BENCHMARK(BM_TransitionBundle)->Arg(4)->Arg(10)->Arg(20);

void BM_ExpectedRecursion(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto s = make_periodic_schedule(n, 3, PeerRule::ring);
  const Time horizon = 10'000;
  for (auto _ : state) {
    double last = 0.0;
    for_each_expected(s, params(n), horizon, [&](Time, const Vector& z, const PrecisionLedger&) { last = z[0]; });
    benchmark::DoNotOptimize(last);
  }
  state.SetItemsProcessed(state.iterations() * horizon);
}
BENCHMARK(BM_ExpectedRecursion)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_NoisyStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto s = make_periodic_schedule(n, 3, PeerRule::ring);
  const auto p = params(n);
  RecordingOptions rec;
  rec.every = 0;
  const Time horizon = 10'000;
  for (auto _ : state) benchmark::DoNotOptimize(run_simulation(s, p, horizon, rec));
  state.SetItemsProcessed(state.iterations() * horizon);
}
BENCHMARK(BM_NoisyStep)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_BoundSuite(benchmark::State& state) {
  const auto s = make_random_schedule(8, 3, 0.3, 11);
  SuiteSelection sel;
  sel.diagonal = sel.contraction = sel.product_decay = true;
  for (auto _ : state) benchmark::DoNotOptimize(run_bound_suite(s, params(8), 1000, 3, sel));
}
BENCHMARK(BM_BoundSuite)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
