#include "cxrflag/kernels.hpp"

#include <omp.h>

#include <random>

namespace cxrflag::kernels {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

CalibrationPoint draw(std::mt19937_64& rng, const CrcSimulationSpec& spec) {
  CalibrationPoint p;
  p.entailed = unit(rng) < spec.p_entailed ? 1 : 0;
  const double support = p.entailed ? spec.support_if_entailed : spec.support_if_hallucinated;
  for (int k = 0; k < spec.n; ++k) p.score += unit(rng) < support ? 1 : 0;
  return p;
}

void prefix_sum(std::vector<std::int64_t>& hist) {
  // hist[s] counts score == s; turn into counts of score < lambda.
  std::int64_t running = 0;
  for (auto& h : hist) {
    const auto here = h;
    h = running;
    running += here;
  }
}

}  // namespace

CrcTrial run_crc_trial(const CrcSimulationSpec& spec, int trial) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(trial))));
  std::vector<CalibrationPoint> cal(static_cast<std::size_t>(spec.calibration_size));
  for (auto& p : cal) p = draw(rng, spec);
  const auto counts = serial::factual_flag_counts(cal, spec.n);
  const int lambda =
      lambda_from_counts(counts, cal.size(), spec.alpha, RiskBound::kStandard).value_or(0);
  std::int64_t losses = 0;
  for (int i = 0; i < spec.test_size; ++i) {
    const auto p = draw(rng, spec);
    if (p.entailed == 1 && p.score < lambda) ++losses;
  }
  return {lambda, static_cast<double>(losses) / spec.test_size};
}

namespace serial {

std::vector<std::int64_t> factual_flag_counts(std::span<const CalibrationPoint> points, int n) {
  std::vector<std::int64_t> hist(static_cast<std::size_t>(n) + 2, 0);
  for (const auto& p : points) {
    if (p.entailed == 1) ++hist[static_cast<std::size_t>(p.score)];
  }
  prefix_sum(hist);
  return hist;
}

std::vector<CrcTrial> crc_trials(const CrcSimulationSpec& spec) {
  std::vector<CrcTrial> out(static_cast<std::size_t>(spec.trials));
  for (int t = 0; t < spec.trials; ++t) out[static_cast<std::size_t>(t)] = run_crc_trial(spec, t);
  return out;
}

}  // namespace serial

namespace omp {

int max_threads() { return omp_get_max_threads(); }

std::vector<std::int64_t> factual_flag_counts(std::span<const CalibrationPoint> points, int n) {
  const std::size_t bins = static_cast<std::size_t>(n) + 2;
  std::vector<std::int64_t> hist(bins, 0);
  const auto size = static_cast<std::int64_t>(points.size());
#pragma omp parallel
  {
    std::vector<std::int64_t> local(bins, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < size; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      if (p.entailed == 1) ++local[static_cast<std::size_t>(p.score)];
    }
#pragma omp critical
    for (std::size_t b = 0; b < bins; ++b) hist[b] += local[b];
  }
  prefix_sum(hist);
  return hist;
}

std::vector<CrcTrial> crc_trials(const CrcSimulationSpec& spec) {
  std::vector<CrcTrial> out(static_cast<std::size_t>(spec.trials));
#pragma omp parallel for schedule(dynamic, 8)
  for (int t = 0; t < spec.trials; ++t) out[static_cast<std::size_t>(t)] = run_crc_trial(spec, t);
  return out;
}

}  // namespace omp

}  // namespace cxrflag::kernels
