#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <biphoton/config.hpp>
#include <biphoton/correlation.hpp>
#include <biphoton/source_sim.hpp>
#include <biphoton/tomography.hpp>

using namespace biphoton;

namespace {

Params paper_params(std::int64_t duration_ps) {
  Params p;
  apply_preset(p, "paper");
  p.duration_ps = duration_ps;
  p.seed = 7;
  return p;
}

// One simulated second at paper rates: ~10^4 tags per arm.
void BM_Simulate(benchmark::State& state) {
  const auto cfg = make_source_config(paper_params(state.range(0) * 1'000'000'000'000));
  for (auto _ : state) {
    auto [s, as] = simulate(cfg);
    benchmark::DoNotOptimize(s.tags.data());
    benchmark::DoNotOptimize(as.tags.data());
    state.SetItemsProcessed(state.items_processed() +
                            static_cast<std::int64_t>(s.tags.size() + as.tags.size()));
  }
}
BENCHMARK(BM_Simulate)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_CoincidenceHistogram(benchmark::State& state) {
  const auto params = paper_params(state.range(0) * 1'000'000'000'000);
  const auto [s, as] = simulate(make_source_config(params));
  for (auto _ : state) {
    auto h = coincidence_histogram(s, as, params.bin_width_ps, params.t_min_ps,
                                   static_cast<std::size_t>(params.n_bins));
    benchmark::DoNotOptimize(h.counts.data());
    state.SetItemsProcessed(state.items_processed() +
                            static_cast<std::int64_t>(s.tags.size() + as.tags.size()));
  }
}
BENCHMARK(BM_CoincidenceHistogram)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_FitExponential(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::vector<double> x(206), y(206);
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = (static_cast<double>(k) + 0.5) * 1940.0;
    const double mu = 10.0 + 500.0 * std::exp(-x[k] / 40000.0);
    y[k] = static_cast<double>(std::poisson_distribution<std::uint64_t>(mu)(rng));
  }
  for (auto _ : state) {
    auto fit = fit_exponential_xy(x, y, {});
    benchmark::DoNotOptimize(fit.tau_ps);
  }
}
BENCHMARK(BM_FitExponential)->Unit(benchmark::kMicrosecond);

void BM_MleReconstruct(benchmark::State& state) {
  const auto probs = expected_probabilities(werner_state(0.9));
  TomographyInput in;
  in.accumulation_s = 1.0;
  for (std::size_t i = 0; i < 16; ++i)
    in.counts[i] = static_cast<std::uint64_t>(std::llround(1e6 * probs[i]));
  for (auto _ : state) {
    auto r = mle_reconstruct(in);
    benchmark::DoNotOptimize(r.rho.data());
  }
}
BENCHMARK(BM_MleReconstruct)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
