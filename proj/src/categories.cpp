#include "cxrflag/categories.hpp"

#include <algorithm>
#include <cctype>

#include "cxrflag/assets.hpp"
#include "cxrflag/errors.hpp"

namespace cxrflag {

std::vector<std::string> keyword_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

const CategoryClassifier& CategoryClassifier::builtin() {
  static const CategoryClassifier instance = [] {
    auto text = assets::find("category_keywords_v1");
    if (!text) throw Error("category keyword table is not embedded");
    return from_json(nlohmann::json::parse(*text));
  }();
  return instance;
}

CategoryClassifier CategoryClassifier::from_json(const nlohmann::json& table) {
  CategoryClassifier c;
  c.version_ = table.at("version").get<int>();
  const auto& categories = table.at("categories");
  for (const auto& name : table.at("priority")) {
    auto category = category_from_string(name.get<std::string>());
    if (!category) throw DataError("unknown category in keyword table: " + name.dump());
    Entry entry{*category, {}};
    for (const auto& kw : categories.at(name.get<std::string>()).at("keywords")) {
      auto words = keyword_words(kw.get<std::string>());
      if (!words.empty()) entry.keywords.push_back(std::move(words));
    }
    c.ordered_.push_back(std::move(entry));
  }
  return c;
}

bool CategoryClassifier::hits(const Entry& entry, const std::vector<std::string>& words) const {
  for (const auto& kw : entry.keywords) {
    if (kw.size() > words.size()) continue;
    if (std::search(words.begin(), words.end(), kw.begin(), kw.end()) != words.end()) {
      return true;
    }
  }
  return false;
}

Category CategoryClassifier::classify(std::string_view text) const {
  const auto words = keyword_words(text);
  for (const auto& entry : ordered_) {
    if (hits(entry, words)) return entry.category;
  }
  return Category::kOther;
}

std::vector<Category> CategoryClassifier::matches(std::string_view text) const {
  const auto words = keyword_words(text);
  std::vector<Category> out;
  for (const auto& entry : ordered_) {
    if (hits(entry, words)) out.push_back(entry.category);
  }
  return out;
}

Category categorize(std::string_view sentence_text) {
  return CategoryClassifier::builtin().classify(sentence_text);
}

}  // namespace cxrflag
