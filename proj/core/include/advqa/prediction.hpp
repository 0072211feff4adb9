#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "advqa/corpus.hpp"

namespace advqa {

struct Guess {
    AnswerLabel answer;
    double score = 0.0;

    friend bool operator==(const Guess&, const Guess&) = default;
};

/// Ranked predictions from one model: scores non-increasing, ties broken by
/// ascending class index, no duplicate answers.
using GuessList = std::vector<Guess>;

/// Selects the top-k entries of `scores` (indexed by class) under the
/// guess ordering. `labels[i]` must have class_index i.
GuessList top_k(std::span<const double> scores, std::span<const AnswerLabel> labels, std::size_t k);

enum class EvidenceNormalization { Raw, MaxAbsOne };

/// Per-token importance weights aligned 1:1 with a token sequence.
struct EvidenceMap {
    std::vector<double> weights;
    EvidenceNormalization normalization = EvidenceNormalization::Raw;

    friend bool operator==(const EvidenceMap&, const EvidenceMap&) = default;
};

/// Rescales so that max |w| = 1; all-zero maps are returned unchanged.
EvidenceMap normalized(EvidenceMap evidence);

} // namespace advqa
