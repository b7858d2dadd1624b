#include "cxrflag/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "cxrflag/errors.hpp"

namespace cxrflag {

namespace {

double mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double entropy_of(const std::vector<double>& dist, const std::string& where) {
  double h = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError(where + ": distribution entry outside [0, 1]");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

EntropyScores entropy_baselines(const Report& report) {
  const auto& id = report.study_id;
  if (!report.token_probs || report.token_probs->empty()) {
    throw DataError("report '" + id + "' has no token probabilities");
  }
  EntropyScores out;
  out.study_id = id;

  std::vector<double> per_sentence;
  for (std::size_t s = 0; s < report.token_probs->size(); ++s) {
    const auto& tokens = (*report.token_probs)[s];
    if (tokens.empty()) {
      throw DataError("report '" + id + "' sentence " + std::to_string(s) + " has no tokens");
    }
    double sum = 0.0;
    for (double p : tokens) {
      if (!(p > 0.0 && p <= 1.0)) {
        throw DataError("report '" + id + "': token probability outside (0, 1]");
      }
      sum -= std::log(p);
    }
    per_sentence.push_back(sum / static_cast<double>(tokens.size()));
  }
  out.avg_neg_logprob = mean(per_sentence);

  if (report.token_distributions) {
    const auto& dists = *report.token_distributions;
    if (dists.size() != report.token_probs->size()) {
      throw DataError("report '" + id + "': distributions and probabilities disagree on sentences");
    }
    std::vector<double> sentence_entropy;
    int slice = 0;
    for (std::size_t s = 0; s < dists.size(); ++s) {
      if (dists[s].size() != (*report.token_probs)[s].size()) {
        throw DataError("report '" + id + "' sentence " + std::to_string(s) +
                        ": one distribution per token required");
      }
      std::vector<double> hs;
      for (const auto& d : dists[s]) {
        hs.push_back(entropy_of(d, "report '" + id + "'"));
        slice = std::max(slice, static_cast<int>(d.size()));
      }
      sentence_entropy.push_back(mean(hs));
    }
    out.avg_entropy = mean(sentence_entropy);
    out.distribution_slice = slice;
  }
  return out;
}

namespace serial {

std::vector<EntropyScores> entropy_baselines(std::span<const Report> reports) {
  std::vector<EntropyScores> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(cxrflag::entropy_baselines(r));
  return out;
}

}  // namespace serial

namespace omp {

std::vector<EntropyScores> entropy_baselines(std::span<const Report> reports) {
  const auto count = static_cast<std::int64_t>(reports.size());
  std::vector<EntropyScores> out(reports.size());
  std::vector<std::exception_ptr> errors(reports.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = cxrflag::entropy_baselines(reports[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  // Report the first failure in input order, as the serial version would.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace omp

}  // namespace cxrflag
