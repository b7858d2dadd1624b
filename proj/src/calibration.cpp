#include "cxrflag/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cxrflag/errors.hpp"
#include "cxrflag/kernels.hpp"

namespace cxrflag {

using nlohmann::json;

namespace {
// Slack for comparing the bound against alpha in floating point.
constexpr double kBoundTolerance = 1e-12;
}  // namespace

std::string to_string(RiskBound bound) {
  return bound == RiskBound::kStandard ? "standard" : "scaled_infimum";
}

RiskBound risk_bound_from_string(const std::string& name) {
  if (name == "standard") return RiskBound::kStandard;
  if (name == "scaled_infimum") return RiskBound::kScaledInfimum;
  throw ConfigError("unknown formula_variant '" + name + "' (standard | scaled_infimum)");
}

std::string to_string(Lambda2Selection selection) {
  return selection == Lambda2Selection::kAtMost ? "at_most" : "nearest";
}

Lambda2Selection lambda2_selection_from_string(const std::string& name) {
  if (name == "at_most") return Lambda2Selection::kAtMost;
  if (name == "nearest") return Lambda2Selection::kNearest;
  throw ConfigError("unknown lambda2_selection '" + name + "' (at_most | nearest)");
}

json Thresholds::to_json() const {
  json by_fraction = json::object();
  for (const auto& [f, l] : lambda2_by_fraction) by_fraction[json(f).dump()] = l;
  json j = {{"lambda1", lambda1},
            {"lambda2_by_fraction", by_fraction},
            {"alpha", alpha},
            {"n", n},
            {"c", calibration_size},
            {"empirical_risk", empirical_risk},
            {"risk_bound", risk_bound},
            {"formula_variant", to_string(formula_variant)}};
  j["lambda2"] = lambda2 ? json(*lambda2) : json(nullptr);
  return j;
}

Thresholds Thresholds::from_json(const json& j) {
  Thresholds t;
  try {
    t.lambda1 = j.at("lambda1").get<int>();
    for (const auto& [k, v] : j.at("lambda2_by_fraction").items()) {
      t.lambda2_by_fraction[std::stod(k)] = v.get<int>();
    }
    if (j.contains("lambda2") && !j.at("lambda2").is_null()) t.lambda2 = j.at("lambda2").get<int>();
    t.alpha = j.at("alpha").get<double>();
    t.n = j.at("n").get<int>();
    t.calibration_size = j.at("c").get<int>();
    t.empirical_risk = j.at("empirical_risk").get<double>();
    t.risk_bound = j.value("risk_bound", 0.0);
    t.formula_variant = risk_bound_from_string(j.value("formula_variant", std::string("standard")));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed thresholds file: ") + e.what());
  }
  return t;
}

double empirical_risk(std::span<const CalibrationPoint> points, int lambda) {
  if (points.empty()) throw DataError("empirical risk of an empty calibration set");
  std::int64_t losses = 0;
  for (const auto& p : points) {
    if (p.score < lambda && p.entailed == 1) ++losses;
  }
  return static_cast<double>(losses) / static_cast<double>(points.size());
}

double risk_bound_value(std::int64_t count, std::size_t calibration_size, RiskBound variant) {
  const double c = static_cast<double>(calibration_size);
  const double risk = static_cast<double>(count) / c;
  if (variant == RiskBound::kStandard) return c / (c + 1.0) * risk + 1.0 / (c + 1.0);
  return (c + 1.0) / c * risk + 1.0 / (c + 1.0);
}

std::optional<int> lambda_from_counts(std::span<const std::int64_t> counts,
                                      std::size_t calibration_size, double alpha,
                                      RiskBound variant) {
  std::optional<int> chosen;
  for (std::size_t lambda = 0; lambda < counts.size(); ++lambda) {
    const bool feasible =
        risk_bound_value(counts[lambda], calibration_size, variant) <= alpha + kBoundTolerance;
    if (!feasible) continue;
    chosen = static_cast<int>(lambda);
    if (variant == RiskBound::kScaledInfimum) break;
  }
  return chosen;
}

Thresholds calibrate_lambda1(std::span<const CalibrationPoint> points, double alpha, int n,
                             RiskBound variant) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n <= 0) throw ConfigError("n must be positive");
  if (points.empty()) throw DataError("calibration set is empty");
  for (const auto& p : points) {
    if (p.score < 0 || p.score > n) {
      throw DataError("calibration score " + std::to_string(p.score) + " outside [0, " +
                      std::to_string(n) + "]");
    }
    if (p.entailed != 0 && p.entailed != 1) throw DataError("calibration label must be 0 or 1");
  }
  const auto counts = kernels::omp::factual_flag_counts(points, n);
  const auto lambda = lambda_from_counts(counts, points.size(), alpha, variant);
  if (!lambda) {
    throw CalibrationError("calibration set too small for this alpha: no threshold satisfies the "
                           "risk bound (c = " + std::to_string(points.size()) +
                           ", alpha = " + json(alpha).dump() + ")");
  }
  Thresholds t;
  t.lambda1 = *lambda;
  t.alpha = alpha;
  t.n = n;
  t.calibration_size = static_cast<int>(points.size());
  t.empirical_risk = static_cast<double>(counts[static_cast<std::size_t>(*lambda)]) /
                     static_cast<double>(points.size());
  t.risk_bound = risk_bound_value(counts[static_cast<std::size_t>(*lambda)], points.size(), variant);
  t.formula_variant = variant;
  return t;
}

std::map<double, int> sweep_lambda2(std::span<const int> counts, std::span<const double> fractions,
                                    Lambda2Selection selection) {
  if (counts.empty()) throw DataError("lambda2 sweep needs at least one report");
  const int max_count = *std::max_element(counts.begin(), counts.end());
  if (*std::min_element(counts.begin(), counts.end()) < 0) throw DataError("negative flag count");
  const double total = static_cast<double>(counts.size());
  // flagged[l] = fraction of reports with count >= l, l = 1..max_count+1.
  std::vector<double> flagged(static_cast<std::size_t>(max_count) + 2, 0.0);
  for (int l = 1; l <= max_count + 1; ++l) {
    const auto k = std::count_if(counts.begin(), counts.end(), [l](int c) { return c >= l; });
    flagged[static_cast<std::size_t>(l)] = static_cast<double>(k) / total;
  }
  std::map<double, int> out;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("target fractions must lie in (0, 1)");
    int chosen = max_count + 1;
    if (selection == Lambda2Selection::kAtMost) {
      for (int l = 1; l <= max_count + 1; ++l) {
        if (flagged[static_cast<std::size_t>(l)] <= f) {
          chosen = l;
          break;
        }
      }
    } else {
      double best = 2.0;
      for (int l = 1; l <= max_count + 1; ++l) {
        const double gap = std::abs(flagged[static_cast<std::size_t>(l)] - f);
        if (gap < best - 1e-15) {
          best = gap;
          chosen = l;
        }
      }
    }
    out[f] = chosen;
  }
  return out;
}

CrcSimulationResult simulate_crc(const CrcSimulationSpec& spec) {
  if (spec.trials <= 0 || spec.calibration_size <= 0 || spec.test_size <= 0) {
    throw ConfigError("simulation sizes must be positive");
  }
  const auto trials = kernels::omp::crc_trials(spec);
  CrcSimulationResult r;
  double sum = 0.0;
  for (const auto& t : trials) {
    r.lambdas.push_back(t.lambda1);
    r.test_risks.push_back(t.test_risk);
    sum += t.test_risk;
  }
  r.mean_test_risk = sum / static_cast<double>(trials.size());
  r.standard_error = std::sqrt(spec.alpha * (1.0 - spec.alpha) /
                               (static_cast<double>(spec.trials) * spec.test_size));
  return r;
}

}  // namespace cxrflag
