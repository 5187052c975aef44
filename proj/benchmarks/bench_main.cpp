#include <benchmark/benchmark.h>

#include "qpol/fisher.hpp"
#include "qpol/montecarlo.hpp"
#include "qpol/uncertainty.hpp"

namespace {

void BM_SampleCampaign(benchmark::State& state) {
  qpol::ProbeConfig probe;
  probe.regime = state.range(0) ? qpol::Regime::Classical : qpol::Regime::Quantum;
  const auto theta = qpol::PolarizationAngle::from_degrees(41.7);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(qpol::sample_campaign(probe, theta, seed++));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(probe.mu));
}
BENCHMARK(BM_SampleCampaign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FullCampaign(benchmark::State& state) {
  qpol::CampaignSpec spec;
  spec.sample.concentration = 0.5;
  for (double d = -100.0; d <= 100.0; d += 10.0) spec.theta_in_grid_deg.push_back(d);
  const qpol::RunOptions options{static_cast<unsigned>(state.range(0)), false};
  for (auto _ : state) benchmark::DoNotOptimize(qpol::run_campaign(spec, options));
}
BENCHMARK(BM_FullCampaign)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FisherNumeric(benchmark::State& state) {
  const auto family = qpol::outcome_family(qpol::Scheme::TwoMode, qpol::Regime::Classical, 0.3, 0.2,
                                           static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(qpol::fi_numeric(family, 0.6));
}
BENCHMARK(BM_FisherNumeric)->Arg(1)->Arg(5)->Arg(20);

void BM_LepGrid(benchmark::State& state) {
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 1; i < 90; ++i) {
      const qpol::UncertaintyContext ctx{qpol::EstimatorKind::Diff, qpol::Regime::Quantum,
                                         qpol::PolarizationAngle::from_degrees(i), 0.3, 0.2, 1e5, 1.0};
      acc += qpol::lep_uncertainty(ctx);
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_LepGrid);

}  // namespace

BENCHMARK_MAIN();
