#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace advqa {

/// Ordered lowercase word tokens. No token is empty or contains whitespace.
using TokenSequence = std::vector<std::string>;

/// Canonical tokenizer shared by every model and analysis.
///
/// Splits on Unicode whitespace, lowercases (ASCII and Latin-1), strips
/// leading/trailing punctuation and removes internal punctuation other than
/// hyphens and apostrophes. Words that reduce to nothing are dropped, so
/// whitespace-only input yields an empty sequence.
TokenSequence tokenize(std::string_view text);

/// One surviving word of `tokenize`, with the information the sentence
/// splitter and the entity heuristic need.
struct WordInfo {
    std::string token;       ///< lowercased token, identical to tokenize()
    std::string cased;       ///< same token before lowercasing
    bool sentence_start;     ///< first token of the text or after a sentence end
    bool ends_sentence;      ///< raw word carried a trailing '.', '?' or '!'
    bool trailing_punct;     ///< raw word carried any trailing punctuation
};

std::vector<WordInfo> analyze_words(std::string_view text);

/// Token counts at which a sentence ends (split on '.', '?', '!').
/// Strictly increasing; the last entry always equals tokenize(text).size()
/// when the text has any token.
std::vector<std::size_t> sentence_boundaries(std::string_view text);

std::string join_tokens(const TokenSequence& tokens);

} // namespace advqa
