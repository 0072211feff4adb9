#include "advqa/tokenizer.hpp"

#include <cstdint>

namespace advqa {
namespace {

struct CodePoint {
    char32_t value;
    std::string_view bytes;
};

// Lenient UTF-8 decoding: an invalid sequence becomes a one-byte code point
// carrying the raw byte, so nothing is silently lost.
std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        char32_t cp = lead;
        if (lead >= 0xC0 && lead < 0xE0) {
            len = 2;
            cp = lead & 0x1F;
        } else if (lead >= 0xE0 && lead < 0xF0) {
            len = 3;
            cp = lead & 0x0F;
        } else if (lead >= 0xF0 && lead < 0xF8) {
            len = 4;
            cp = lead & 0x07;
        }
        bool valid = i + len <= text.size();
        for (std::size_t k = 1; valid && k < len; ++k) {
            const auto c = static_cast<unsigned char>(text[i + k]);
            if ((c & 0xC0) != 0x80) {
                valid = false;
            } else {
                cp = (cp << 6) | (c & 0x3F);
            }
        }
        if (!valid) {
            len = 1;
            cp = lead;
        }
        out.push_back({cp, text.substr(i, len)});
        i += len;
    }
    return out;
}

bool is_space(char32_t c) {
    switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
               (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
    }
    switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x3001: case 0x3002: case 0x3003:
        return true;
    default:
        return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E);
    }
}

bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

bool is_sentence_end(char32_t c) { return c == U'.' || c == U'?' || c == U'!'; }

void append_lower(std::string& out, const CodePoint& cp) {
    if (cp.value >= U'A' && cp.value <= U'Z') {
        out.push_back(static_cast<char>(cp.value + 32));
    } else if (cp.value >= 0xC0 && cp.value <= 0xDE && cp.value != 0xD7 && cp.bytes.size() == 2) {
        const char32_t lower = cp.value + 0x20;
        out.push_back(static_cast<char>(0xC0 | (lower >> 6)));
        out.push_back(static_cast<char>(0x80 | (lower & 0x3F)));
    } else {
        out.append(cp.bytes);
    }
}

} // namespace

std::vector<WordInfo> analyze_words(std::string_view text) {
    const auto cps = decode(text);
    std::vector<WordInfo> words;
    bool next_starts_sentence = true;

    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space(cps[i].value)) {
            ++i;
        }
        const std::size_t begin = i;
        while (i < cps.size() && !is_space(cps[i].value)) {
            ++i;
        }
        const std::size_t end = i;
        if (begin == end) {
            break;
        }

        std::size_t first = begin;
        while (first < end && is_punct(cps[first].value)) {
            ++first;
        }
        if (first == end) {
            // Punctuation-only word: it still terminates the previous token.
            bool stop = false;
            for (std::size_t k = begin; k < end; ++k) {
                stop = stop || is_sentence_end(cps[k].value);
            }
            if (!words.empty()) {
                words.back().trailing_punct = true;
                words.back().ends_sentence = words.back().ends_sentence || stop;
            }
            next_starts_sentence = next_starts_sentence || stop;
            continue;
        }
        std::size_t last = end;
        while (is_punct(cps[last - 1].value)) {
            --last;
        }

        WordInfo w;
        w.sentence_start = next_starts_sentence;
        w.ends_sentence = false;
        w.trailing_punct = last != end;
        for (std::size_t k = last; k < end; ++k) {
            w.ends_sentence = w.ends_sentence || is_sentence_end(cps[k].value);
        }
        for (std::size_t k = first; k < last; ++k) {
            const auto& cp = cps[k];
            if (is_apostrophe(cp.value)) {
                w.token.push_back('\'');
                w.cased.push_back('\'');
            } else if (cp.value == U'-') {
                w.token.push_back('-');
                w.cased.push_back('-');
            } else if (!is_punct(cp.value)) {
                append_lower(w.token, cp);
                w.cased.append(cp.bytes);
            }
        }
        next_starts_sentence = w.ends_sentence;
        words.push_back(std::move(w));
    }
    return words;
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    for (auto& w : analyze_words(text)) {
        out.push_back(std::move(w.token));
    }
    return out;
}

std::vector<std::size_t> sentence_boundaries(std::string_view text) {
    const auto words = analyze_words(text);
    std::vector<std::size_t> ends;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (words[i].ends_sentence) {
            ends.push_back(i + 1);
        }
    }
    if (!words.empty() && (ends.empty() || ends.back() != words.size())) {
        ends.push_back(words.size());
    }
    return ends;
}

std::string join_tokens(const TokenSequence& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

} // namespace advqa
