#include "advqa/embedding.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "advqa/error.hpp"
#include "advqa/rng.hpp"

namespace advqa {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), zeros_(dim, 0.0) {
    if (dim == 0) {
        throw Error("invalid_argument", "embedding dimension must be positive");
    }
}

void EmbeddingTable::set(std::string token, std::vector<double> vector) {
    if (vector.size() != dim_) {
        throw Error("dimension_mismatch", "vector for \"" + token + "\" has " + std::to_string(vector.size()) +
                                              " components, expected " + std::to_string(dim_));
    }
    vectors_[std::move(token)] = std::move(vector);
}

bool EmbeddingTable::contains(std::string_view token) const { return vectors_.find(token) != vectors_.end(); }

std::span<const double> EmbeddingTable::lookup(std::string_view token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? std::span<const double>(zeros_) : std::span<const double>(it->second);
}

std::vector<double> EmbeddingTable::embed(const TokenSequence& tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size() * dim_);
    for (const auto& t : tokens) {
        const auto v = lookup(t);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

std::vector<std::string> EmbeddingTable::vocabulary() const {
    std::vector<std::string> out;
    out.reserve(vectors_.size());
    for (const auto& [tok, _] : vectors_) {
        out.push_back(tok);
    }
    return out;
}

EmbeddingTable EmbeddingTable::read(std::istream& in) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) {
            continue;
        }
        std::vector<double> values;
        std::string field;
        while (fields >> field) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end != field.c_str() + field.size()) {
                throw Error("malformed_embedding", "line " + std::to_string(lineno) + ": bad number \"" + field + "\"");
            }
            values.push_back(v);
        }
        if (lineno == 1 && values.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
            continue;  // word2vec header
        }
        if (values.empty()) {
            throw Error("malformed_embedding", "line " + std::to_string(lineno) + ": token without vector");
        }
        if (dim == 0) {
            dim = values.size();
        } else if (values.size() != dim) {
            throw Error("malformed_embedding", "line " + std::to_string(lineno) + ": expected " +
                                                   std::to_string(dim) + " components, found " +
                                                   std::to_string(values.size()));
        }
        rows.emplace_back(std::move(token), std::move(values));
    }
    if (dim == 0) {
        throw Error("malformed_embedding", "embedding file has no vectors");
    }
    EmbeddingTable table(dim);
    for (auto& [tok, vec] : rows) {
        table.set(std::move(tok), std::move(vec));
    }
    return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io_error", "cannot open embeddings " + path.string());
    }
    return read(in);
}

void EmbeddingTable::write(std::ostream& out) const {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& [tok, vec] : vectors_) {
        out << tok;
        for (double v : vec) {
            out << ' ' << v;
        }
        out << '\n';
    }
    out.precision(old_precision);
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("io_error", "cannot write embeddings " + path.string());
    }
    write(out);
}

EmbeddingTable EmbeddingTable::random(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed,
                                      double scale) {
    EmbeddingTable table(dim);
    Rng rng(seed);
    for (const auto& tok : tokens) {
        if (table.contains(tok)) {
            continue;
        }
        std::vector<double> v(dim);
        for (auto& x : v) {
            x = scale * rng.normal();
        }
        table.set(tok, std::move(v));
    }
    return table;
}

} // namespace advqa
