#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advqa/corpus.hpp"
#include "advqa/prediction.hpp"

namespace advqa {

struct IndexOptions {
    double k1 = 1.2;
    double b = 0.75;
    bool stem = false;             ///< light plural stripping (S-stemmer)
    bool remove_stopwords = false;

    friend bool operator==(const IndexOptions&, const IndexOptions&) = default;
};

struct Posting {
    std::uint32_t doc;  ///< answer class index
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

enum class IndexFormat { Json, Binary };

/// BM25 index with one document per answer: the concatenation of every
/// training question with that answer.
///
///   idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
///   w(t, d)  = idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))
///
/// Scores sum w over query positions, so a repeated query term counts once
/// per occurrence. Only answers with at least one training question own a
/// document; guess() ranks those. Immutable after build.
class InvertedIndex {
public:
    static InvertedIndex build(const Dataset& data, IndexOptions options = {});

    double score(const TokenSequence& query, std::size_t class_index) const;
    GuessList guess(const TokenSequence& query, std::size_t k) const;

    /// Raw per-position contributions to score(query, class_index).
    EvidenceMap highlight(const TokenSequence& query, std::size_t class_index) const;

    /// The index term a query/document token maps to, or nullopt if it is
    /// dropped as a stopword.
    std::optional<std::string> index_term(std::string_view token) const;

    double idf(std::string_view term) const;
    std::size_t document_frequency(std::string_view term) const;

    std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    double avg_doc_len() const noexcept { return avg_doc_len_; }
    bool has_document(std::size_t class_index) const;
    std::size_t doc_len(std::size_t class_index) const;
    std::map<std::size_t, std::size_t> doc_lens() const;
    const std::vector<std::size_t>& document_ids() const noexcept { return doc_ids_; }
    const std::vector<Posting>* postings(std::string_view term) const;
    const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const noexcept {
        return postings_;
    }

    const std::vector<AnswerLabel>& labels() const noexcept { return labels_; }
    const IndexOptions& options() const noexcept { return options_; }

    static constexpr std::uint32_t kFormatVersion = 1;

    void write(std::ostream& out, IndexFormat format) const;
    static InvertedIndex read(std::istream& in);
    void save(const std::filesystem::path& path, IndexFormat format) const;
    static InvertedIndex load(const std::filesystem::path& path);

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
        return a.options_ == b.options_ && a.labels_ == b.labels_ && a.doc_ids_ == b.doc_ids_ &&
               a.doc_len_ == b.doc_len_ && a.postings_ == b.postings_;
    }

private:
    InvertedIndex() = default;
    void finalize();
    void check_class(std::size_t class_index) const;
    double contribution(double idf, std::uint32_t tf, std::size_t doc) const;

    IndexOptions options_;
    std::vector<AnswerLabel> labels_;
    std::vector<std::size_t> doc_ids_;   // ascending class indices that own a document
    std::vector<std::size_t> doc_len_;   // by class index; 0 when no document
    std::vector<bool> has_doc_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::map<std::string, double, std::less<>> idf_;
    double avg_doc_len_ = 0.0;
};

} // namespace advqa
