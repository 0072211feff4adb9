#pragma once

#include <cstddef>

#include "advqa/classifier.hpp"
#include "advqa/embedding.hpp"
#include "advqa/prediction.hpp"

namespace advqa {

enum class SaliencyMethod { GradientDot, LeaveOneOut };

/// Scale that leave-one-out differences are measured on. Gradient saliency
/// is a first-order estimate of the *logit* drop, so Logit is the scale on
/// which the two methods agree exactly for a linear bag-of-words model.
enum class LooScale { Probability, Logit };

struct SaliencyResult {
    EvidenceMap evidence;
    std::size_t target = 0;
    SaliencyMethod method = SaliencyMethod::GradientDot;
};

/// weight_i = d logit_target / d v_i  .  v_i
///
/// First-order Taylor estimate of how much the target logit falls when
/// token i's embedding is replaced by the zero vector. OOV tokens (zero
/// vectors) get exactly 0.
SaliencyResult saliency_gradient(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q,
                                 std::size_t target);

/// weight_i = score(q) - score(q without token i), with score the target
/// probability (default) or logit. Needs at least two tokens.
SaliencyResult saliency_leave_one_out(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q,
                                      std::size_t target, LooScale scale = LooScale::Probability);

} // namespace advqa
