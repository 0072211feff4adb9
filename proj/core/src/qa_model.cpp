#include "advqa/qa_model.hpp"

#include <fstream>

#include "advqa/error.hpp"
#include "advqa/saliency.hpp"

namespace advqa {

RetrievalModel::RetrievalModel(std::string id, std::shared_ptr<const InvertedIndex> index)
    : id_(std::move(id)), index_(std::move(index)) {
    if (!index_) {
        throw Error("invalid_argument", "retrieval model needs an index");
    }
}

GuessList RetrievalModel::guess(const TokenSequence& query, std::size_t k) const { return index_->guess(query, k); }

EvidenceMap RetrievalModel::evidence(const TokenSequence& query, std::size_t class_index) const {
    return index_->highlight(query, class_index);
}

NeuralModel::NeuralModel(std::string id, std::shared_ptr<const Classifier> clf,
                         std::shared_ptr<const EmbeddingTable> emb)
    : id_(std::move(id)), clf_(std::move(clf)), emb_(std::move(emb)) {
    if (!clf_ || !emb_) {
        throw Error("invalid_argument", "neural model needs a classifier and embeddings");
    }
    if (clf_->shape().dim != emb_->dim()) {
        throw Error("dimension_mismatch", "classifier expects " + std::to_string(clf_->shape().dim) +
                                              "-d embeddings, table has " + std::to_string(emb_->dim()));
    }
}

GuessList NeuralModel::guess(const TokenSequence& query, std::size_t k) const {
    return advqa::guess(*clf_, *emb_, query, k);
}

EvidenceMap NeuralModel::evidence(const TokenSequence& query, std::size_t class_index) const {
    return saliency_gradient(*clf_, *emb_, query, class_index).evidence;
}

std::shared_ptr<const QAModel> load_model_artifact(const std::string& id, const std::filesystem::path& artifact,
                                                   const std::filesystem::path& embeddings) {
    char head[8] = {};
    {
        std::ifstream in(artifact, std::ios::binary);
        if (!in) {
            throw Error("io_error", "cannot open model artifact " + artifact.string());
        }
        in.read(head, sizeof head);
    }
    const std::string magic(head, sizeof head);
    if (magic == "ADVQACLF") {
        if (embeddings.empty()) {
            throw Error("invalid_argument", "classifier " + artifact.string() + " needs an embedding file");
        }
        auto clf = std::make_shared<const Classifier>(Classifier::load(artifact));
        auto emb = std::make_shared<const EmbeddingTable>(EmbeddingTable::load(embeddings));
        return std::make_shared<NeuralModel>(id, std::move(clf), std::move(emb));
    }
    if (magic == "ADVQAIDX" || head[0] == '{') {
        return std::make_shared<RetrievalModel>(id, std::make_shared<const InvertedIndex>(InvertedIndex::load(artifact)));
    }
    throw Error("corrupt_artifact", artifact.string() + " is neither an index nor a classifier");
}

std::size_t find_class(const QAModel& model, std::string_view canonical_name) {
    const auto& labels = model.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].canonical_name == canonical_name) {
            return i;
        }
    }
    return static_cast<std::size_t>(-1);
}

} // namespace advqa
