#include <benchmark/benchmark.h>

#include <cstdint>
#include <limits>

#include "schoolmerge/estimator.hpp"
#include "schoolmerge/experiments.hpp"
#include "schoolmerge/matching.hpp"
#include "schoolmerge/random_market.hpp"
#include "schoolmerge/rng.hpp"

namespace {

using namespace schoolmerge;

void BM_DeferredAcceptance(benchmark::State& state) {
  const auto n = static_cast<std::int32_t>(state.range(0));
  const Market m = generate_random_escp({{n, 2}}, 2, Stream{42});
  for (auto _ : state) {
    benchmark::DoNotOptimize(sosm(m));
  }
  state.SetItemsProcessed(state.iterations() * m.num_students());
}
BENCHMARK(BM_DeferredAcceptance)->Arg(50)->Arg(200)->Arg(1000);

void BM_EnumerateStable(benchmark::State& state) {
  const auto n = static_cast<std::int32_t>(state.range(0));
  const Market m = generate_random_escp({{n, 1}}, 1, Stream{7});
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_stable(m));
  }
}
BENCHMARK(BM_EnumerateStable)->Arg(4)->Arg(5);

void BM_TruncatedNormalCentral(benchmark::State& state) {
  Rng rng(Stream{3}.key);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_truncated_normal(rng, 0.0, -1.0, 1.0));
  }
}
BENCHMARK(BM_TruncatedNormalCentral);

void BM_TruncatedNormalTail(benchmark::State& state) {
  Rng rng(Stream{3}.key);
  const double inf = std::numeric_limits<double>::infinity();
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_truncated_normal(rng, 0.0, 8.0, inf));
  }
}
BENCHMARK(BM_TruncatedNormalTail);

void BM_GibbsIteration(benchmark::State& state) {
  const auto T = static_cast<std::int32_t>(state.range(0));
  const Mode mode = state.range(1) == 0 ? Mode::wtt : Mode::stab_undom;
  const DgpMarket dgp = simulate_dgp_market(T, Stream{11});
  DgpConfig dc;
  const Market submitted = strategic_rols(dgp, dc.cost, Stream{12}, dc);
  const DesignData d = make_dgp_design(dgp, submitted, sosm(submitted), false);
  GibbsConfig gc;
  const GibbsWorkspace ws = GibbsWorkspace::build(d, gc.ridge_scale);
  LatentState latent = init_latent_state(d, mode);
  Rng rng(Stream{13}.key);
  for (auto _ : state) {
    gibbs_iteration(d, mode, gc, ws, latent, rng);
  }
  state.SetItemsProcessed(state.iterations() * (2 * T * d.S));
}
BENCHMARK(BM_GibbsIteration)
    ->Args({50, 0})
    ->Args({50, 1})
    ->Args({200, 0})
    ->Args({200, 1});

}  // namespace

BENCHMARK_MAIN();
