#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cxrflag {

struct CalibrationPoint {
  int score = 0;     // entailment score in [0, n]
  int entailed = 0;  // ground-truth label, 0 or 1
};

// Which finite-sample bound calibrate_lambda1 evaluates.
enum class RiskBound {
  // c/(c+1) * L(lambda) + 1/(c+1) <= alpha, largest feasible lambda.
  kStandard,
  // (c+1)/c * L(lambda) + 1/(c+1) <= alpha, smallest feasible lambda (the
  // literal reading; kept for comparison, it always yields 0 when feasible).
  kScaledInfimum,
};

std::string to_string(RiskBound bound);
RiskBound risk_bound_from_string(const std::string& name);

enum class Lambda2Selection {
  // Smallest lambda2 whose flagged fraction is <= the target.
  kAtMost,
  // lambda2 whose flagged fraction is closest to the target (ties: smaller).
  kNearest,
};

std::string to_string(Lambda2Selection selection);
Lambda2Selection lambda2_selection_from_string(const std::string& name);

struct Thresholds {
  int lambda1 = 0;
  std::map<double, int> lambda2_by_fraction;
  std::optional<int> lambda2;  // the report threshold picked for flagging
  double alpha = 0.0;
  int n = 0;
  int calibration_size = 0;
  double empirical_risk = 0.0;  // L_c at lambda1
  double risk_bound = 0.0;      // evaluated bound at lambda1
  RiskBound formula_variant = RiskBound::kStandard;

  nlohmann::json to_json() const;
  static Thresholds from_json(const nlohmann::json& j);
  bool operator==(const Thresholds&) const = default;
};

// Fraction of calibration sentences that are factual and flagged at lambda,
// i.e. mean of [score < lambda] * entailed.
double empirical_risk(std::span<const CalibrationPoint> points, int lambda);

// Searches lambda in {0, ..., n+1}. Throws CalibrationError when no lambda
// satisfies the bound (alpha too small for the calibration set size).
Thresholds calibrate_lambda1(std::span<const CalibrationPoint> points, double alpha, int n,
                             RiskBound variant = RiskBound::kStandard);

// Largest (kStandard) or smallest (kScaledInfimum) feasible lambda given the
// cumulative factual-flag counts over the grid 0..n+1 and calibration size c.
// Returns nullopt when no lambda is feasible.
std::optional<int> lambda_from_counts(std::span<const std::int64_t> factual_flag_counts,
                                      std::size_t calibration_size, double alpha,
                                      RiskBound variant);
double risk_bound_value(std::int64_t factual_flag_count, std::size_t calibration_size,
                        RiskBound variant);

// For each target fraction f, a lambda2 chosen from the per-report flag
// counts (see Lambda2Selection). lambda2 = max(count)+1 flags nothing.
std::map<double, int> sweep_lambda2(std::span<const int> report_flag_counts,
                                    std::span<const double> target_fractions,
                                    Lambda2Selection selection = Lambda2Selection::kAtMost);

// Synthetic check of the risk guarantee: each trial draws a calibration set
// and a held-out set from a fixed generative model, calibrates lambda1 on the
// first and measures the risk on the second.
struct CrcSimulationSpec {
  int trials = 1000;
  int calibration_size = 300;
  int test_size = 300;
  int n = 10;
  double alpha = 0.05;
  double p_entailed = 0.65;
  double support_if_entailed = 0.8;  // per-sample support probability
  double support_if_hallucinated = 0.3;
  std::uint64_t seed = 1;
};

struct CrcSimulationResult {
  double mean_test_risk = 0.0;
  // Binomial standard error sqrt(alpha (1 - alpha) / (trials * test_size)).
  double standard_error = 0.0;
  std::vector<int> lambdas;  // per trial
  std::vector<double> test_risks;
};

CrcSimulationResult simulate_crc(const CrcSimulationSpec& spec);

}  // namespace cxrflag
