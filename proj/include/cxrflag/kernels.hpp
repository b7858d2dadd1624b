#pragma once

// Data-parallel kernels. Each has a serial reference in `serial` and an
// OpenMP version in `omp` that must produce identical results.

#include <cstdint>
#include <span>
#include <vector>

#include "cxrflag/calibration.hpp"

namespace cxrflag::kernels {

struct CrcTrial {
  int lambda1 = 0;
  double test_risk = 0.0;
};

namespace serial {

// Cumulative count of entailed points with score < lambda, lambda = 0..n+1.
std::vector<std::int64_t> factual_flag_counts(std::span<const CalibrationPoint> points, int n);

std::vector<CrcTrial> crc_trials(const CrcSimulationSpec& spec);

}  // namespace serial

namespace omp {

std::vector<std::int64_t> factual_flag_counts(std::span<const CalibrationPoint> points, int n);

std::vector<CrcTrial> crc_trials(const CrcSimulationSpec& spec);

int max_threads();

}  // namespace omp

// Per-trial draw shared by both implementations. Each trial seeds its own
// engine from (spec.seed, trial), so results do not depend on scheduling.
CrcTrial run_crc_trial(const CrcSimulationSpec& spec, int trial);

}  // namespace cxrflag::kernels
