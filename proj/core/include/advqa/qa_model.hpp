#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "advqa/classifier.hpp"
#include "advqa/embedding.hpp"
#include "advqa/ir_engine.hpp"
#include "advqa/prediction.hpp"

namespace advqa {

enum class ModelFamily { Retrieval, Neural, Other };

/// Uniform view over a guesser. Implementations must be deterministic and
/// safe to call concurrently.
class QAModel {
public:
    virtual ~QAModel() = default;

    virtual std::string id() const = 0;
    virtual ModelFamily family() const { return ModelFamily::Other; }

    /// Answer vocabulary, indexed by class_index.
    virtual const std::vector<AnswerLabel>& labels() const = 0;

    virtual GuessList guess(const TokenSequence& query, std::size_t k) const = 0;

    /// Per-token evidence for `class_index` on `query`.
    virtual EvidenceMap evidence(const TokenSequence& query, std::size_t class_index) const = 0;
};

class RetrievalModel final : public QAModel {
public:
    RetrievalModel(std::string id, std::shared_ptr<const InvertedIndex> index);

    std::string id() const override { return id_; }
    ModelFamily family() const override { return ModelFamily::Retrieval; }
    const std::vector<AnswerLabel>& labels() const override { return index_->labels(); }
    GuessList guess(const TokenSequence& query, std::size_t k) const override;
    /// BM25 highlight contributions.
    EvidenceMap evidence(const TokenSequence& query, std::size_t class_index) const override;

    const InvertedIndex& index() const noexcept { return *index_; }

private:
    std::string id_;
    std::shared_ptr<const InvertedIndex> index_;
};

class NeuralModel final : public QAModel {
public:
    NeuralModel(std::string id, std::shared_ptr<const Classifier> clf, std::shared_ptr<const EmbeddingTable> emb);

    std::string id() const override { return id_; }
    ModelFamily family() const override { return ModelFamily::Neural; }
    const std::vector<AnswerLabel>& labels() const override { return clf_->labels(); }
    GuessList guess(const TokenSequence& query, std::size_t k) const override;
    /// Gradient-times-embedding saliency of the class logit.
    EvidenceMap evidence(const TokenSequence& query, std::size_t class_index) const override;

    const Classifier& classifier() const noexcept { return *clf_; }
    const EmbeddingTable& embeddings() const noexcept { return *emb_; }

private:
    std::string id_;
    std::shared_ptr<const Classifier> clf_;
    std::shared_ptr<const EmbeddingTable> emb_;
};

/// Loads a saved index or classifier, detecting the kind from the file
/// header. Classifiers also need the embedding table they were trained with.
std::shared_ptr<const QAModel> load_model_artifact(const std::string& id, const std::filesystem::path& artifact,
                                                   const std::filesystem::path& embeddings = {});

/// Index of `canonical_name` in the model's vocabulary, or npos.
std::size_t find_class(const QAModel& model, std::string_view canonical_name);

} // namespace advqa
