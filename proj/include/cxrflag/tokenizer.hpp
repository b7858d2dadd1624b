#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cxrflag/corpus.hpp"

namespace cxrflag {

// Splits on '.', '!' or '?' followed by whitespace and an upper-case letter,
// or by end of text. Decimals, initials, list enumerators and a fixed set of
// abbreviations (Dr., a.m., vs., approx., ...) never end a sentence.
// Whitespace inside each sentence is collapsed to single spaces, so joining
// the result with ' ' gives normalize_whitespace(text).
std::vector<std::string> split_sentences(std::string_view text);

// Sentences of a report, indexed from 0. Precondition: text is non-empty.
std::vector<Sentence> tokenize(const Report& report);

std::string normalize_whitespace(std::string_view text);

}  // namespace cxrflag
