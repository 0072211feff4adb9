#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advqa/corpus.hpp"

namespace advqa {

/// Proportion of the distinct n-grams of `test_q` that occur in some
/// training question with the same answer. Throws if `test_q` has fewer
/// than n tokens.
double ngram_overlap(const Question& test_q, const Dataset& train, std::size_t n);

/// Length of the longest token span of `test_q` that occurs verbatim in a
/// same-answer training question; 0 when nothing matches.
std::size_t longest_ngram_overlap(const Question& test_q, const Dataset& train);

/// Capitalization-based entity approximation: maximal runs of capitalized
/// words that are not sentence-initial. A run also ends after a word that
/// carries trailing punctuation. Spans are half-open token index ranges.
struct NamedEntityApprox {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
};

NamedEntityApprox extract_entities_approx(const Question& q);

/// Lowercased, space-joined surface forms of the entity spans.
std::vector<std::string> entity_strings(const Question& q);

/// Fraction of `q`'s distinct entity strings that are also entities of a
/// same-answer training question; nullopt when `q` has no entities.
std::optional<double> entity_overlap(const Question& q, const Dataset& train);

struct AnswerFrequency {
    double mean_examples_per_answer = 0.0;
};

/// Mean, over `qs`, of the number of training questions sharing each
/// question's answer.
AnswerFrequency answer_frequency(const Dataset& train, std::span<const Question> qs);

/// Table-3 style diagnostics for a question set against training data.
/// Means skip questions too short for the statistic (bigram overlap) or
/// without entities (NE overlap).
struct OverlapReport {
    double unigram_overlap = 0.0;
    double bigram_overlap = 0.0;
    double longest_ngram_overlap = 0.0;
    double ne_overlap = 0.0;
    std::optional<double> ne_overlap_ir_adversarial;
    std::optional<double> ne_overlap_rnn_adversarial;
    double total_words = 0.0;
    double total_ne = 0.0;
    double mean_examples_per_answer = 0.0;
    std::size_t n_questions = 0;
};

OverlapReport overlap_report(std::span<const Question> qs, const Dataset& train);

void write_report_json(std::ostream& out, const OverlapReport& r);

/// Two columns (metric,value) in Table 3 row order.
void write_report_csv(std::ostream& out, const OverlapReport& r);

} // namespace advqa
