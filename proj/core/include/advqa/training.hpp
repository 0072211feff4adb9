#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "advqa/classifier.hpp"
#include "advqa/corpus.hpp"
#include "advqa/embedding.hpp"

namespace advqa {

struct TrainConfig {
    Arch arch = Arch::DAN;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::size_t hidden = 64;
    double dropout_keep = 1.0;  ///< keep probability on pooled features
    bool bidirectional = false;

    // Adam constants.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainReport {
    std::vector<double> epoch_loss;  ///< mean cross-entropy per epoch
    double initial_loss = 0.0;       ///< mean cross-entropy before any update
};

/// Mean cross-entropy of `clf` over `questions` (no dropout).
double mean_loss(const Classifier& clf, const EmbeddingTable& emb, const std::vector<Question>& questions);

/// Mini-batch Adam on the training split. Fully determined by
/// (data, emb, cfg); single-threaded. Throws on fewer than two classes,
/// a class without training questions, or a non-finite batch loss.
Classifier train(const Dataset& data, const EmbeddingTable& emb, const TrainConfig& cfg,
                 TrainReport* report = nullptr);

/// Top-1 accuracy on full questions.
double accuracy(const Classifier& clf, const EmbeddingTable& emb, const std::vector<Question>& questions);

} // namespace advqa
