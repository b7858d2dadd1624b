// Serial versus OpenMP kernels on synthetic inputs.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cxrflag/calibration.hpp"
#include "cxrflag/corpus.hpp"
#include "cxrflag/entropy.hpp"
#include "cxrflag/kernels.hpp"

namespace {

using namespace cxrflag;

std::vector<CalibrationPoint> make_points(std::size_t count) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> score(0, 10);
  std::bernoulli_distribution entailed(0.6);
  std::vector<CalibrationPoint> points(count);
  for (auto& p : points) p = {score(rng), entailed(rng) ? 1 : 0};
  return points;
}

std::vector<Report> make_reports(std::size_t count) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<Report> reports(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& r = reports[i];
    r.study_id = "b" + std::to_string(i);
    r.text = "x";
    TokenProbabilities probs(6);
    TokenDistributions dists(6);
    for (std::size_t s = 0; s < probs.size(); ++s) {
      for (int t = 0; t < 20; ++t) {
        const double p = u(rng);
        probs[s].push_back(p);
        dists[s].push_back({p, (1 - p) / 2, (1 - p) / 2});
      }
    }
    r.token_probs = std::move(probs);
    r.token_distributions = std::move(dists);
  }
  return reports;
}

template <auto Fn>
void BM_FactualFlagCounts(benchmark::State& state) {
  const auto points = make_points(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(points, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_CrcTrials(benchmark::State& state) {
  CrcSimulationSpec spec;
  spec.trials = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Entropy(benchmark::State& state) {
  const auto reports = make_reports(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(reports));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_FactualFlagCounts<kernels::serial::factual_flag_counts>)->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_FactualFlagCounts<kernels::omp::factual_flag_counts>)->Arg(1 << 14)->Arg(1 << 18);
BENCHMARK(BM_CrcTrials<kernels::serial::crc_trials>)->Arg(200);
BENCHMARK(BM_CrcTrials<kernels::omp::crc_trials>)->Arg(200);
BENCHMARK(BM_Entropy<serial::entropy_baselines>)->Arg(256);
BENCHMARK(BM_Entropy<omp::entropy_baselines>)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
