#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advqa/corpus.hpp"
#include "advqa/embedding.hpp"
#include "advqa/prediction.hpp"

namespace advqa {

/// DAN: mean of word vectors -> tanh hidden layer -> linear logits.
/// GRU: gated recurrent encoder (optionally bidirectional), final state(s)
///      -> linear logits.
/// LinearBow: logits = W * (sum of word vectors) + b. Used as a closed-form
///      reference model for saliency tests.
enum class Arch { DAN, GRU, LinearBow };

std::string_view to_string(Arch a);
std::optional<Arch> parse_arch(std::string_view s);

struct ModelShape {
    Arch arch = Arch::DAN;
    std::size_t dim = 300;
    std::size_t hidden = 64;
    std::size_t num_classes = 2;
    bool bidirectional = false;

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Named slice of the flat parameter vector; matrices are row-major.
struct ParamSegment {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;

    std::size_t size() const noexcept { return rows * cols; }
};

/// Row-major n x dim matrix of input vectors for one question.
struct InputMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

InputMatrix embed_input(const EmbeddingTable& emb, const TokenSequence& tokens);

struct Gradients {
    std::vector<double> params;  ///< same layout as Classifier::params()
    std::vector<double> inputs;  ///< same layout as InputMatrix::values
};

/// Fixed-architecture text classifier with a flat float64 parameter vector.
/// Immutable once trained; all inference methods are const and thread-safe.
class Classifier {
public:
    /// Xavier-uniform weights and zero biases drawn from `seed`.
    static Classifier create(const ModelShape& shape, std::vector<AnswerLabel> labels, std::uint64_t seed);

    static std::size_t parameter_count(const ModelShape& shape);

    const ModelShape& shape() const noexcept { return shape_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t num_classes() const noexcept { return shape_.num_classes; }
    const std::vector<AnswerLabel>& labels() const noexcept { return labels_; }

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> mutable_params() noexcept { return params_; }
    const std::vector<ParamSegment>& segments() const noexcept { return segments_; }
    const ParamSegment& segment(std::string_view name) const;
    std::span<double> segment_values(std::string_view name);
    std::span<const double> segment_values(std::string_view name) const;

    /// Pre-softmax scores. Requires at least one input row.
    std::vector<double> logits(const InputMatrix& inputs) const;

    /// Gradient of sum_c upstream[c] * logits[c] with respect to the
    /// parameters and the input vectors. `dropout_mask`, when non-empty,
    /// multiplies the pooled hidden features (training only).
    Gradients backward(const InputMatrix& inputs, std::span<const double> upstream,
                       std::span<const double> dropout_mask = {}) const;

    /// Logits under a dropout mask on the pooled features.
    std::vector<double> logits(const InputMatrix& inputs, std::span<const double> dropout_mask) const;

    /// Width of the pooled feature vector the dropout mask applies to.
    std::size_t feature_width() const noexcept;

    static constexpr std::uint32_t kFormatVersion = 1;

    void write(std::ostream& out) const;
    static Classifier read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Classifier load(const std::filesystem::path& path);

    friend bool operator==(const Classifier& a, const Classifier& b) {
        return a.shape_ == b.shape_ && a.seed_ == b.seed_ && a.labels_ == b.labels_ && a.params_ == b.params_;
    }

private:
    Classifier(const ModelShape& shape, std::vector<AnswerLabel> labels, std::uint64_t seed);

    ModelShape shape_;
    std::uint64_t seed_ = 0;
    std::vector<AnswerLabel> labels_;
    std::vector<double> params_;
    std::vector<ParamSegment> segments_;
};

std::vector<double> softmax(std::span<const double> logits);

/// Probability distribution over the classifier's answers. Empty input is
/// an error.
std::vector<double> forward(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q);

std::vector<double> logits(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q);

GuessList guess(const Classifier& clf, const EmbeddingTable& emb, const TokenSequence& q, std::size_t k);

} // namespace advqa
