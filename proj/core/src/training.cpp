#include "advqa/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "advqa/error.hpp"
#include "advqa/rng.hpp"

namespace advqa {
namespace {

double cross_entropy(std::span<const double> logits, std::size_t gold, std::vector<double>* dlogits) {
    auto p = softmax(logits);
    const double loss = -std::log(std::max(p[gold], 1e-300));
    if (dlogits) {
        p[gold] -= 1.0;
        *dlogits = std::move(p);
    }
    return loss;
}

} // namespace

double mean_loss(const Classifier& clf, const EmbeddingTable& emb, const std::vector<Question>& questions) {
    if (questions.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& q : questions) {
        total += cross_entropy(logits(clf, emb, q.tokens), q.answer.class_index, nullptr);
    }
    return total / static_cast<double>(questions.size());
}

double accuracy(const Classifier& clf, const EmbeddingTable& emb, const std::vector<Question>& questions) {
    if (questions.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& q : questions) {
        const auto top = guess(clf, emb, q.tokens, 1);
        correct += (!top.empty() && top.front().answer.canonical_name == q.answer.canonical_name) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(questions.size());
}

Classifier train(const Dataset& data, const EmbeddingTable& emb, const TrainConfig& cfg, TrainReport* report) {
    const auto& vocab = data.answer_vocab();
    if (vocab.size() < 2) {
        throw Error("single_class", "training needs at least two answer classes");
    }
    if (cfg.batch_size == 0 || cfg.hidden == 0 || !(cfg.learning_rate > 0.0) || !(cfg.dropout_keep > 0.0) ||
        cfg.dropout_keep > 1.0) {
        throw Error("invalid_config", "batch_size, hidden, learning_rate and dropout_keep must be positive");
    }
    const auto train_qs = data.train_questions();
    std::vector<std::size_t> per_class(vocab.size(), 0);
    for (const auto& q : train_qs) {
        ++per_class[q.answer.class_index];
    }
    for (std::size_t c = 0; c < vocab.size(); ++c) {
        if (per_class[c] == 0) {
            throw Error("missing_class", "answer \"" + vocab[c].canonical_name + "\" has no training questions");
        }
    }

    ModelShape shape{cfg.arch, emb.dim(), cfg.hidden, vocab.size(), cfg.bidirectional};
    Classifier clf = Classifier::create(shape, vocab, cfg.seed);

    std::vector<InputMatrix> inputs;
    inputs.reserve(train_qs.size());
    for (const auto& q : train_qs) {
        inputs.push_back(embed_input(emb, q.tokens));
    }

    // Shuffling and dropout draw from a stream separate from initialization.
    Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    const std::size_t n_params = clf.params().size();
    std::vector<double> m(n_params, 0.0);
    std::vector<double> v(n_params, 0.0);
    std::vector<double> grad(n_params);
    std::vector<std::size_t> order(train_qs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t width = clf.feature_width();
    std::vector<double> mask;
    std::uint64_t step = 0;

    TrainReport local;
    local.initial_loss = mean_loss(clf, emb, train_qs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_total = 0.0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            std::vector<double> dlogits;
            for (std::size_t i = start; i < end; ++i) {
                const auto idx = order[i];
                mask.clear();
                if (cfg.dropout_keep < 1.0) {
                    mask.resize(width);
                    for (auto& mk : mask) {
                        mk = rng.uniform() < cfg.dropout_keep ? 1.0 / cfg.dropout_keep : 0.0;
                    }
                }
                const auto z = clf.logits(inputs[idx], mask);
                batch_loss += cross_entropy(z, train_qs[idx].answer.class_index, &dlogits);
                const auto g = clf.backward(inputs[idx], dlogits, mask);
                for (std::size_t p = 0; p < n_params; ++p) {
                    grad[p] += g.params[p];
                }
            }
            if (!std::isfinite(batch_loss)) {
                throw Error("nan_loss", "non-finite loss in epoch " + std::to_string(epoch + 1) + ", batch " +
                                            std::to_string(batch + 1));
            }
            epoch_total += batch_loss;

            const double scale = 1.0 / static_cast<double>(end - start);
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto params = clf.mutable_params();
            for (std::size_t p = 0; p < n_params; ++p) {
                const double gp = grad[p] * scale;
                m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * gp;
                v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * gp * gp;
                const double mhat = m[p] / bc1;
                const double vhat = v[p] / bc2;
                params[p] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            }
        }
        local.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));
    }
    if (report) {
        *report = std::move(local);
    }
    return clf;
}

} // namespace advqa
