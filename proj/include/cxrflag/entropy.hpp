#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxrflag/corpus.hpp"

namespace cxrflag {

struct EntropyScores {
  std::string study_id;
  double avg_neg_logprob = 0.0;
  // Needs next-token distributions; absent otherwise.
  std::optional<double> avg_entropy;
  // Widest distribution slice seen, when avg_entropy is present.
  std::optional<int> distribution_slice;

  bool operator==(const EntropyScores&) const = default;
};

// Mean over tokens of -log p within each sentence, then the mean over
// sentences. Entropy is taken over whatever slice of the next-token
// distribution is present, unnormalized. Throws DataError when token
// probabilities are missing or malformed.
EntropyScores entropy_baselines(const Report& report);

namespace serial {
std::vector<EntropyScores> entropy_baselines(std::span<const Report> reports);
}

namespace omp {
std::vector<EntropyScores> entropy_baselines(std::span<const Report> reports);
}

}  // namespace cxrflag
