#include "advqa/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace advqa {

GuessList top_k(std::span<const double> scores, std::span<const AnswerLabel> labels, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) {
                              return scores[a] > scores[b];
                          }
                          return a < b;
                      });
    GuessList out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.push_back({labels[order[i]], scores[order[i]]});
    }
    return out;
}

EvidenceMap normalized(EvidenceMap evidence) {
    double max_abs = 0.0;
    for (double w : evidence.weights) {
        max_abs = std::max(max_abs, std::abs(w));
    }
    if (max_abs > 0.0) {
        for (double& w : evidence.weights) {
            w /= max_abs;
        }
    }
    evidence.normalization = EvidenceNormalization::MaxAbsOne;
    return evidence;
}

} // namespace advqa
