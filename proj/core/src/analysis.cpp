#include "advqa/analysis.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

#include <json.hpp>

#include "advqa/error.hpp"

namespace advqa {
namespace {

std::string ngram_key(const TokenSequence& t, std::size_t start, std::size_t n) {
    std::string key;
    for (std::size_t i = start; i < start + n; ++i) {
        if (i > start) {
            key.push_back('\x1f');
        }
        key += t[i];
    }
    return key;
}

std::set<std::string> ngrams(const TokenSequence& t, std::size_t n) {
    std::set<std::string> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
        out.insert(ngram_key(t, i, n));
    }
    return out;
}

std::size_t longest_common_run(const TokenSequence& a, const TokenSequence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
            best = std::max(best, cur[j]);
        }
        std::swap(prev, cur);
    }
    return best;
}

bool capitalized(const std::string& cased) {
    if (cased.empty()) {
        return false;
    }
    const auto c0 = static_cast<unsigned char>(cased[0]);
    if (c0 >= 'A' && c0 <= 'Z') {
        return true;
    }
    // Latin-1 uppercase letters U+00C0..U+00DE except U+00D7.
    if (c0 == 0xC3 && cased.size() > 1) {
        const auto c1 = static_cast<unsigned char>(cased[1]);
        return c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97;
    }
    return false;
}

template <typename F>
std::optional<double> mean_of(std::span<const Question> qs, F&& value) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& q : qs) {
        if (auto v = value(q)) {
            total += *v;
            ++count;
        }
    }
    if (count == 0) {
        return std::nullopt;
    }
    return total / static_cast<double>(count);
}

} // namespace

double ngram_overlap(const Question& test_q, const Dataset& train, std::size_t n) {
    if (n == 0) {
        throw Error("invalid_argument", "n-gram order must be positive");
    }
    if (test_q.tokens.size() < n) {
        throw Error("question_too_short", "question \"" + test_q.id + "\" has fewer than " + std::to_string(n) +
                                              " tokens");
    }
    const auto mine = ngrams(test_q.tokens, n);
    std::set<std::string> seen;
    for (auto idx : train.train_indices_for(test_q.answer.canonical_name)) {
        const auto theirs = ngrams(train.questions()[idx].tokens, n);
        seen.insert(theirs.begin(), theirs.end());
    }
    std::size_t shared = 0;
    for (const auto& g : mine) {
        shared += seen.count(g);
    }
    return static_cast<double>(shared) / static_cast<double>(mine.size());
}

std::size_t longest_ngram_overlap(const Question& test_q, const Dataset& train) {
    std::size_t best = 0;
    for (auto idx : train.train_indices_for(test_q.answer.canonical_name)) {
        best = std::max(best, longest_common_run(test_q.tokens, train.questions()[idx].tokens));
    }
    return best;
}

NamedEntityApprox extract_entities_approx(const Question& q) {
    const auto words = analyze_words(q.raw_text);
    NamedEntityApprox out;
    std::size_t i = 0;
    while (i < words.size()) {
        if (words[i].sentence_start || !capitalized(words[i].cased)) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        while (i < words.size() && !words[i].sentence_start && capitalized(words[i].cased)) {
            const bool stop = words[i].trailing_punct;
            ++i;
            if (stop) {
                break;
            }
        }
        out.spans.emplace_back(begin, i);
    }
    return out;
}

std::vector<std::string> entity_strings(const Question& q) {
    const auto tokens = tokenize(q.raw_text);
    std::vector<std::string> out;
    for (const auto& [b, e] : extract_entities_approx(q).spans) {
        out.push_back(join_tokens(TokenSequence(tokens.begin() + static_cast<std::ptrdiff_t>(b),
                                                tokens.begin() + static_cast<std::ptrdiff_t>(e))));
    }
    return out;
}

std::optional<double> entity_overlap(const Question& q, const Dataset& train) {
    const auto mine_list = entity_strings(q);
    const std::set<std::string> mine(mine_list.begin(), mine_list.end());
    if (mine.empty()) {
        return std::nullopt;
    }
    std::set<std::string> seen;
    for (auto idx : train.train_indices_for(q.answer.canonical_name)) {
        for (auto& e : entity_strings(train.questions()[idx])) {
            seen.insert(std::move(e));
        }
    }
    std::size_t shared = 0;
    for (const auto& e : mine) {
        shared += seen.count(e);
    }
    return static_cast<double>(shared) / static_cast<double>(mine.size());
}

AnswerFrequency answer_frequency(const Dataset& train, std::span<const Question> qs) {
    if (qs.empty()) {
        throw Error("empty_question_set", "answer frequency needs at least one question");
    }
    double total = 0.0;
    for (const auto& q : qs) {
        total += static_cast<double>(train.train_indices_for(q.answer.canonical_name).size());
    }
    return {total / static_cast<double>(qs.size())};
}

OverlapReport overlap_report(std::span<const Question> qs, const Dataset& train) {
    if (qs.empty()) {
        throw Error("empty_question_set", "overlap report needs at least one question");
    }
    OverlapReport r;
    r.n_questions = qs.size();
    r.unigram_overlap = mean_of(qs, [&](const Question& q) -> std::optional<double> {
                            return ngram_overlap(q, train, 1);
                        }).value_or(0.0);
    r.bigram_overlap = mean_of(qs, [&](const Question& q) -> std::optional<double> {
                           if (q.tokens.size() < 2) {
                               return std::nullopt;
                           }
                           return ngram_overlap(q, train, 2);
                       }).value_or(0.0);
    r.longest_ngram_overlap = mean_of(qs, [&](const Question& q) -> std::optional<double> {
                                  return static_cast<double>(longest_ngram_overlap(q, train));
                              }).value_or(0.0);
    r.ne_overlap = mean_of(qs, [&](const Question& q) { return entity_overlap(q, train); }).value_or(0.0);
    const auto by_source = [&](Source s) {
        return mean_of(qs, [&](const Question& q) -> std::optional<double> {
            if (q.source != s) {
                return std::nullopt;
            }
            return entity_overlap(q, train);
        });
    };
    r.ne_overlap_ir_adversarial = by_source(Source::AdversarialIR);
    r.ne_overlap_rnn_adversarial = by_source(Source::AdversarialRNN);
    r.total_words = mean_of(qs, [](const Question& q) -> std::optional<double> {
                        return static_cast<double>(q.tokens.size());
                    }).value_or(0.0);
    r.total_ne = mean_of(qs, [](const Question& q) -> std::optional<double> {
                     return static_cast<double>(extract_entities_approx(q).spans.size());
                 }).value_or(0.0);
    r.mean_examples_per_answer = answer_frequency(train, qs).mean_examples_per_answer;
    return r;
}

void write_report_json(std::ostream& out, const OverlapReport& r) {
    nlohmann::json j;
    j["n_questions"] = r.n_questions;
    j["unigram_overlap"] = r.unigram_overlap;
    j["bigram_overlap"] = r.bigram_overlap;
    j["longest_ngram_overlap"] = r.longest_ngram_overlap;
    j["ne_overlap_approx"] = r.ne_overlap;
    j["ne_overlap_approx_ir_adversarial"] =
        r.ne_overlap_ir_adversarial ? nlohmann::json(*r.ne_overlap_ir_adversarial) : nlohmann::json(nullptr);
    j["ne_overlap_approx_rnn_adversarial"] =
        r.ne_overlap_rnn_adversarial ? nlohmann::json(*r.ne_overlap_rnn_adversarial) : nlohmann::json(nullptr);
    j["total_words"] = r.total_words;
    j["total_ne_approx"] = r.total_ne;
    j["mean_examples_per_answer"] = r.mean_examples_per_answer;
    j["metadata"] = {{"ngram_semantics", "distinct n-grams (set)"},
                     {"ne_method", "capitalization heuristic (approx)"},
                     {"ne_overlap_unit", "entity span"}};
    out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const OverlapReport& r) {
    const auto old = out.precision(std::numeric_limits<double>::max_digits10);
    const auto opt = [&](const std::optional<double>& v) {
        if (v) {
            out << *v;
        }
    };
    out << "metric,value\n";
    out << "unigram_overlap," << r.unigram_overlap << '\n';
    out << "bigram_overlap," << r.bigram_overlap << '\n';
    out << "longest_ngram_overlap," << r.longest_ngram_overlap << '\n';
    out << "ne_overlap_approx," << r.ne_overlap << '\n';
    out << "ne_overlap_approx_ir_adversarial,";
    opt(r.ne_overlap_ir_adversarial);
    out << '\n';
    out << "ne_overlap_approx_rnn_adversarial,";
    opt(r.ne_overlap_rnn_adversarial);
    out << '\n';
    out << "total_words," << r.total_words << '\n';
    out << "total_ne_approx," << r.total_ne << '\n';
    out << "mean_examples_per_answer," << r.mean_examples_per_answer << '\n';
    out << "n_questions," << r.n_questions << '\n';
    out.precision(old);
}

} // namespace advqa
