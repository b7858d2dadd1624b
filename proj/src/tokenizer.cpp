#include "cxrflag/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "cxrflag/errors.hpp"

namespace cxrflag {

namespace {

constexpr std::array<std::string_view, 19> kAbbreviations = {
    "dr", "mr", "mrs", "ms", "st", "vs", "approx", "e.g", "i.e", "a.m",
    "p.m", "fig", "cf", "ca", "jr", "sr", "prof", "resp", "incl",
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_ordinal(std::string_view w) {
  if (w.size() < 3) return false;
  const auto suffix = w.substr(w.size() - 2);
  if (suffix != "st" && suffix != "nd" && suffix != "rd" && suffix != "th") return false;
  const auto digits = w.substr(0, w.size() - 2);
  return std::all_of(digits.begin(), digits.end(), is_digit);
}

// True when the period at `dot` must not end a sentence.
bool protected_period(std::string_view text, std::size_t sentence_start, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > sentence_start && !is_space(text[begin - 1]) && !is_opener(text[begin - 1])) {
    --begin;
  }
  const std::string word = lower(text.substr(begin, dot - begin));
  if (word.empty()) return false;
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) {
    return true;
  }
  // "No. 2"
  if (word == "no") {
    std::size_t k = dot + 1;
    while (k < text.size() && is_space(text[k])) ++k;
    return k < text.size() && is_digit(text[k]);
  }
  if (word.size() == 1 && is_alpha(word[0])) return true;  // initial
  if (is_ordinal(word)) return true;
  // "1." enumerating a list item at the start of a sentence.
  if (std::all_of(word.begin(), word.end(), is_digit)) {
    std::size_t k = sentence_start;
    while (k < begin && is_space(text[k])) ++k;
    return k == begin;
  }
  return false;
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  auto emit = [&](std::size_t from, std::size_t to) {
    std::string s = normalize_whitespace(text.substr(from, to - from));
    if (!s.empty()) sentences.push_back(std::move(s));
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < text.size() && (text[j + 1] == '.' || text[j + 1] == '!' || text[j + 1] == '?')) {
      ++j;
    }
    if (c == '.' && i == j && protected_period(text, start, i)) {
      i = j + 1;
      continue;
    }
    std::size_t end = j + 1;
    while (end < text.size() && is_closer(text[end])) ++end;

    bool boundary = false;
    if (end >= text.size()) {
      boundary = true;
    } else if (is_space(text[end])) {
      std::size_t k = end;
      while (k < text.size() && is_space(text[k])) ++k;
      while (k < text.size() && is_opener(text[k])) ++k;
      boundary = k >= text.size() || is_upper(text[k]);
    }
    if (boundary) {
      emit(start, end);
      start = end;
    }
    i = end;
  }
  if (start < text.size()) emit(start, text.size());
  return sentences;
}

std::vector<Sentence> tokenize(const Report& report) {
  if (normalize_whitespace(report.text).empty()) {
    throw DataError("cannot tokenize an empty report (study " + report.study_id + ")");
  }
  std::vector<Sentence> out;
  int index = 0;
  for (auto& text : split_sentences(report.text)) {
    Sentence s;
    s.study_id = report.study_id;
    s.index = index++;
    s.text = std::move(text);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cxrflag
