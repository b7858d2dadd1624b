#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cxrflag/corpus.hpp"
#include "json.hpp"

namespace cxrflag {

// Keyword classifier over the six finding categories. Matching is
// case-insensitive on whole words; multi-word keywords match contiguous word
// runs. The first category in priority order with any match wins.
class CategoryClassifier {
 public:
  // Shipped keyword table (data/category_keywords.v1.json).
  static const CategoryClassifier& builtin();
  static CategoryClassifier from_json(const nlohmann::json& table);

  Category classify(std::string_view text) const;
  // Every category with at least one keyword hit, in priority order.
  std::vector<Category> matches(std::string_view text) const;

  int version() const { return version_; }

 private:
  struct Entry {
    Category category;
    std::vector<std::vector<std::string>> keywords;
  };
  bool hits(const Entry& entry, const std::vector<std::string>& words) const;

  std::vector<Entry> ordered_;
  int version_ = 0;
};

Category categorize(std::string_view sentence_text);

// Lower-cased alphanumeric word runs.
std::vector<std::string> keyword_words(std::string_view text);

}  // namespace cxrflag
