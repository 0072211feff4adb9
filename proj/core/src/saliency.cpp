#include "advqa/saliency.hpp"

#include <string>
#include <vector>

#include "advqa/error.hpp"

namespace advqa {
namespace {

void check_target(const Classifier& clf, std::size_t target) {
    if (target >= clf.num_classes()) {
        throw Error("unknown_class", "saliency target " + std::to_string(target) + " out of range for " +
                                         std::to_string(clf.num_classes()) + " classes");
    }
}

} // namespace

SaliencyResult saliency_gradient(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q,
                                 std::size_t target) {
    check_target(clf, target);
    if (q.empty()) {
        throw Error("empty_question", "saliency needs a nonempty question");
    }
    const auto x = embed_input(emb, q);
    std::vector<double> upstream(clf.num_classes(), 0.0);
    upstream[target] = 1.0;
    const auto g = clf.backward(x, upstream);

    SaliencyResult out;
    out.target = target;
    out.method = SaliencyMethod::GradientDot;
    out.evidence.weights.assign(q.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < x.dim; ++j) {
            dot += g.inputs[i * x.dim + j] * x.values[i * x.dim + j];
        }
        out.evidence.weights[i] = dot;
    }
    return out;
}

SaliencyResult saliency_leave_one_out(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q,
                                      std::size_t target, LooScale scale) {
    check_target(clf, target);
    if (q.size() < 2) {
        throw Error("question_too_short", "leave-one-out needs at least two tokens");
    }
    const auto value = [&](const TokenSequence& tokens) {
        const auto z = logits(clf, emb, tokens);
        return scale == LooScale::Logit ? z[target] : softmax(z)[target];
    };
    const double full = value(q);

    SaliencyResult out;
    out.target = target;
    out.method = SaliencyMethod::LeaveOneOut;
    out.evidence.weights.resize(q.size());
    TokenSequence reduced;
    for (std::size_t i = 0; i < q.size(); ++i) {
        reduced.assign(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(i));
        reduced.insert(reduced.end(), q.begin() + static_cast<std::ptrdiff_t>(i + 1), q.end());
        out.evidence.weights[i] = full - value(reduced);
    }
    return out;
}

} // namespace advqa
