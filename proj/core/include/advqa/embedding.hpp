#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <map>
#include <vector>

#include "advqa/tokenizer.hpp"

namespace advqa {

/// Frozen pretrained word vectors. Unknown tokens map to the zero vector.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dim = 300);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return vectors_.size(); }

    void set(std::string token, std::vector<double> vector);
    bool contains(std::string_view token) const;

    /// The stored vector, or a zero vector of length dim() for OOV tokens.
    std::span<const double> lookup(std::string_view token) const;

    /// Row-major n x dim matrix of the tokens' vectors.
    std::vector<double> embed(const TokenSequence& tokens) const;

    /// Tokens in ascending order.
    std::vector<std::string> vocabulary() const;

    /// Reads "token v1 ... vd" lines (GloVe text format). A leading
    /// word2vec-style "<count> <dim>" header line is skipped. The
    /// dimension is taken from the first vector; ragged rows are an error.
    static EmbeddingTable load(const std::filesystem::path& path);
    static EmbeddingTable read(std::istream& in);

    /// Writes the text format with tokens sorted and values in
    /// round-trip precision.
    void write(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;

    /// Independent N(0, scale^2) coordinates per token, seeded.
    static EmbeddingTable random(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed,
                                 double scale = 1.0);

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

private:
    std::size_t dim_;
    std::map<std::string, std::vector<double>, std::less<>> vectors_;
    std::vector<double> zeros_;
};

} // namespace advqa
