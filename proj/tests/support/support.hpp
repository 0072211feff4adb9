#pragma once

// Independent oracles and stub models shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except to
// read plain data (tokens, labels, splits).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advqa/classifier.hpp"
#include "advqa/corpus.hpp"
#include "advqa/qa_model.hpp"
#include "advqa/stats.hpp"

namespace advqa::test {

std::filesystem::path data_path(const std::string& name);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

// ---------------------------------------------------------------------------
// BM25 straight from the formula: documents are kept as raw token lists and
// every statistic is recounted per call.
struct BruteBm25 {
    std::map<std::size_t, TokenSequence> docs;  // class index -> concatenated training tokens
    std::vector<AnswerLabel> labels;
    double k1 = 1.2;
    double b = 0.75;

    explicit BruteBm25(const Dataset& data, double k1 = 1.2, double b = 0.75);

    double idf(const std::string& term) const;
    double term_weight(const std::string& term, std::size_t cls) const;
    std::vector<double> contributions(const TokenSequence& q, std::size_t cls) const;
    double score(const TokenSequence& q, std::size_t cls) const;
    // Every document-owning class, sorted by (score desc, class asc), cut to k.
    std::vector<std::pair<std::size_t, double>> ranking(const TokenSequence& q, std::size_t k) const;
};

// ---------------------------------------------------------------------------
// A model that answers from a script: the first token of each query names a
// script entry and the query length selects the class to return. npos means
// "no guess".
class ScriptedModel final : public QAModel {
public:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    ScriptedModel(std::string id, std::vector<AnswerLabel> labels,
                  std::map<std::string, std::vector<std::size_t>> script);

    std::string id() const override { return id_; }
    const std::vector<AnswerLabel>& labels() const override { return labels_; }
    GuessList guess(const TokenSequence& query, std::size_t k) const override;
    EvidenceMap evidence(const TokenSequence& query, std::size_t class_index) const override;

    std::size_t calls() const { return calls_; }

private:
    std::string id_;
    std::vector<AnswerLabel> labels_;
    std::map<std::string, std::vector<std::size_t>> script_;
    mutable std::size_t calls_ = 0;
};

// A model that always returns the same class, or the gold class if told
// which question carries which answer.
class ConstantModel final : public QAModel {
public:
    ConstantModel(std::string id, std::vector<AnswerLabel> labels, std::function<std::size_t(const TokenSequence&)> f);
    std::string id() const override { return id_; }
    const std::vector<AnswerLabel>& labels() const override { return labels_; }
    GuessList guess(const TokenSequence& query, std::size_t k) const override;
    EvidenceMap evidence(const TokenSequence& query, std::size_t) const override {
        return {std::vector<double>(query.size(), 0.0), EvidenceNormalization::Raw};
    }

private:
    std::string id_;
    std::vector<AnswerLabel> labels_;
    std::function<std::size_t(const TokenSequence&)> f_;
};

std::vector<AnswerLabel> make_labels(std::size_t n);

// Question with tokens {tag, w1, ..., w(n-1)} so a ScriptedModel can find it.
Question scripted_question(const std::string& tag, std::size_t n, std::size_t gold,
                           const std::vector<AnswerLabel>& labels);

// ---------------------------------------------------------------------------
// Finite differences.
double central_difference(const std::function<double()>& f, double& x, double h);
// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
double relative_error(const std::vector<double>& a, const std::vector<double>& b);

// Scalar re-implementations of the forward passes, written without the
// library's matrix helpers. Parameters are read by segment name.
std::vector<double> reference_logits(const Classifier& clf, const InputMatrix& x);

// ---------------------------------------------------------------------------
// Statistics oracles.
// Exact two-sided Fisher p from integer hypergeometric counts; totals up to 120.
double fisher_enumeration(const Table2x2& t);

// ---------------------------------------------------------------------------
// Overlap oracles (set semantics, brute force).
std::vector<const Question*> same_answer_training(const Question& q, const Dataset& train);
double brute_ngram_overlap(const Question& q, const Dataset& train, std::size_t n);
std::size_t brute_longest_overlap(const Question& q, const Dataset& train);
// Entity strings from the raw ASCII text with a straightforward rule: a
// capitalized word that does not open a sentence starts or continues an
// entity; a word ending in punctuation closes it.
std::vector<std::string> brute_entities(const std::string& raw_text);

}  // namespace advqa::test
