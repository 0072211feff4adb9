#include "advqa/ir_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "advqa/error.hpp"
#include "binary_io.hpp"

namespace advqa {
namespace {

using nlohmann::json;

constexpr auto kStopwords = std::to_array<std::string_view>({
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as",
    "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can",
    "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had",
    "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
    "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
    "ours", "ourselves", "out", "over", "own", "s", "same", "she", "should", "so", "some", "such",
    "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these",
    "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "you",
    "your", "yours", "yourself", "yourselves",
});

static_assert(std::is_sorted(kStopwords.begin(), kStopwords.end()));

bool is_stopword(std::string_view t) {
    return std::binary_search(kStopwords.begin(), kStopwords.end(), t);
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Harman's S-stemmer.
std::string s_stem(std::string_view w) {
    if (w.size() > 3 && ends_with(w, "ies") && !ends_with(w, "eies") && !ends_with(w, "aies")) {
        return std::string(w.substr(0, w.size() - 3)) + "y";
    }
    if (w.size() > 2 && ends_with(w, "es") && !ends_with(w, "aes") && !ends_with(w, "ees") &&
        !ends_with(w, "oes")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    if (w.size() > 1 && ends_with(w, "s") && !ends_with(w, "us") && !ends_with(w, "ss")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    return std::string(w);
}

} // namespace

std::optional<std::string> InvertedIndex::index_term(std::string_view token) const {
    if (options_.remove_stopwords && is_stopword(token)) {
        return std::nullopt;
    }
    if (options_.stem) {
        return s_stem(token);
    }
    return std::string(token);
}

InvertedIndex InvertedIndex::build(const Dataset& data, IndexOptions options) {
    InvertedIndex index;
    index.options_ = options;
    index.labels_ = data.answer_vocab();
    const std::size_t n = index.labels_.size();
    index.doc_len_.assign(n, 0);
    index.has_doc_.assign(n, false);

    std::vector<std::map<std::string, std::uint32_t, std::less<>>> term_freqs(n);
    for (const auto& q : data.questions()) {
        if (data.split_of(q.id) != Split::Train) {
            continue;
        }
        const auto doc = q.answer.class_index;
        index.has_doc_[doc] = true;
        for (const auto& tok : q.tokens) {
            if (auto term = index.index_term(tok)) {
                ++term_freqs[doc][*term];
                ++index.doc_len_[doc];
            }
        }
    }
    for (std::size_t doc = 0; doc < n; ++doc) {
        if (!index.has_doc_[doc]) {
            continue;
        }
        index.doc_ids_.push_back(doc);
        for (const auto& [term, tf] : term_freqs[doc]) {
            index.postings_[term].push_back({static_cast<std::uint32_t>(doc), tf});
        }
    }
    if (index.doc_ids_.empty()) {
        throw Error("no_training_data", "cannot build an index without training questions");
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize() {
    std::size_t total = 0;
    for (auto doc : doc_ids_) {
        total += doc_len_[doc];
    }
    avg_doc_len_ = static_cast<double>(total) / static_cast<double>(doc_ids_.size());
    const auto num = static_cast<double>(doc_ids_.size());
    idf_.clear();
    for (const auto& [term, list] : postings_) {
        const auto df = static_cast<double>(list.size());
        idf_.emplace(term, std::log(1.0 + (num - df + 0.5) / (df + 0.5)));
    }
}

void InvertedIndex::check_class(std::size_t class_index) const {
    if (class_index >= labels_.size()) {
        throw Error("unknown_class", "class index " + std::to_string(class_index) + " outside answer vocabulary of " +
                                         std::to_string(labels_.size()));
    }
}

bool InvertedIndex::has_document(std::size_t class_index) const {
    return class_index < has_doc_.size() && has_doc_[class_index];
}

std::size_t InvertedIndex::doc_len(std::size_t class_index) const {
    check_class(class_index);
    return doc_len_[class_index];
}

std::map<std::size_t, std::size_t> InvertedIndex::doc_lens() const {
    std::map<std::size_t, std::size_t> out;
    for (auto doc : doc_ids_) {
        out.emplace(doc, doc_len_[doc]);
    }
    return out;
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::size_t InvertedIndex::document_frequency(std::string_view term) const {
    const auto* list = postings(term);
    return list ? list->size() : 0;
}

double InvertedIndex::idf(std::string_view term) const {
    if (auto it = idf_.find(term); it != idf_.end()) {
        return it->second;
    }
    const auto num = static_cast<double>(doc_ids_.size());
    return std::log(1.0 + (num + 0.5) / 0.5);
}

double InvertedIndex::contribution(double idf, std::uint32_t tf, std::size_t doc) const {
    const double k1 = options_.k1;
    const double b = options_.b;
    const double f = static_cast<double>(tf);
    const double rel_len = avg_doc_len_ > 0.0 ? static_cast<double>(doc_len_[doc]) / avg_doc_len_ : 1.0;
    return idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * rel_len));
}

EvidenceMap InvertedIndex::highlight(const TokenSequence& query, std::size_t class_index) const {
    check_class(class_index);
    EvidenceMap ev;
    ev.weights.assign(query.size(), 0.0);
    if (!has_doc_[class_index]) {
        return ev;
    }
    for (std::size_t i = 0; i < query.size(); ++i) {
        const auto term = index_term(query[i]);
        if (!term) {
            continue;
        }
        auto it = postings_.find(*term);
        if (it == postings_.end()) {
            continue;
        }
        const auto& list = it->second;
        auto p = std::lower_bound(list.begin(), list.end(), class_index,
                                  [](const Posting& post, std::size_t doc) { return post.doc < doc; });
        if (p != list.end() && p->doc == class_index) {
            ev.weights[i] = contribution(idf_.find(*term)->second, p->tf, class_index);
        }
    }
    return ev;
}

double InvertedIndex::score(const TokenSequence& query, std::size_t class_index) const {
    double total = 0.0;
    for (double w : highlight(query, class_index).weights) {
        total += w;
    }
    return total;
}

GuessList InvertedIndex::guess(const TokenSequence& query, std::size_t k) const {
    // Term-at-a-time accumulation in query order, so each document's sum is
    // formed in the same order as score().
    std::vector<double> acc(labels_.size(), 0.0);
    for (const auto& tok : query) {
        const auto term = index_term(tok);
        if (!term) {
            continue;
        }
        auto it = postings_.find(*term);
        if (it == postings_.end()) {
            continue;
        }
        const double term_idf = idf_.find(*term)->second;
        for (const auto& p : it->second) {
            acc[p.doc] += contribution(term_idf, p.tf, p.doc);
        }
    }
    std::vector<double> scores;
    std::vector<AnswerLabel> labels;
    scores.reserve(doc_ids_.size());
    labels.reserve(doc_ids_.size());
    for (auto doc : doc_ids_) {
        scores.push_back(acc[doc]);
        labels.push_back(labels_[doc]);
    }
    // top_k breaks ties by position, and doc_ids_ is ascending by class index.
    return top_k(scores, labels, k);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kBinaryMagic[8] = {'A', 'D', 'V', 'Q', 'A', 'I', 'D', 'X'};

} // namespace

void InvertedIndex::write(std::ostream& out, IndexFormat format) const {
    if (format == IndexFormat::Json) {
        json j;
        j["format"] = "advqa-index";
        j["version"] = kFormatVersion;
        j["num_docs"] = doc_ids_.size();
        j["k1"] = options_.k1;
        j["b"] = options_.b;
        j["stem"] = options_.stem;
        j["remove_stopwords"] = options_.remove_stopwords;
        json labels = json::array();
        for (const auto& l : labels_) {
            labels.push_back(l.canonical_name);
        }
        j["labels"] = std::move(labels);
        json vocab = json::array();
        json postings = json::array();
        for (const auto& [term, list] : postings_) {
            vocab.push_back(term);
            json plist = json::array();
            for (const auto& p : list) {
                plist.push_back(json::array({p.doc, p.tf}));
            }
            postings.push_back(std::move(plist));
        }
        json lens = json::array();
        for (auto doc : doc_ids_) {
            lens.push_back(json::array({doc, doc_len_[doc]}));
        }
        j["vocabulary"] = std::move(vocab);
        j["doc_lens"] = std::move(lens);
        j["postings"] = std::move(postings);
        out << j.dump() << '\n';
        return;
    }
    out.write(kBinaryMagic, sizeof kBinaryMagic);
    binio::put_u32(out, kFormatVersion);
    binio::put_u64(out, doc_ids_.size());
    binio::put_f64(out, options_.k1);
    binio::put_f64(out, options_.b);
    binio::put_u32(out, (options_.stem ? 1U : 0U) | (options_.remove_stopwords ? 2U : 0U));
    binio::put_u64(out, labels_.size());
    for (const auto& l : labels_) {
        binio::put_string(out, l.canonical_name);
    }
    for (auto doc : doc_ids_) {
        binio::put_u64(out, doc);
        binio::put_u64(out, doc_len_[doc]);
    }
    binio::put_u64(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        binio::put_string(out, term);
        binio::put_u64(out, list.size());
        for (const auto& p : list) {
            binio::put_u32(out, p.doc);
            binio::put_u32(out, p.tf);
        }
    }
}

InvertedIndex InvertedIndex::read(std::istream& in) {
    InvertedIndex index;
    const int first = in.peek();
    if (first == '{') {
        json j;
        try {
            j = json::parse(in);
            if (j.at("format") != "advqa-index") {
                throw Error("corrupt_artifact", "not an advqa index");
            }
            if (j.at("version").get<std::uint32_t>() != kFormatVersion) {
                throw Error("unsupported_version", "unsupported index version " + j.at("version").dump());
            }
            index.options_.k1 = j.at("k1").get<double>();
            index.options_.b = j.at("b").get<double>();
            index.options_.stem = j.value("stem", false);
            index.options_.remove_stopwords = j.value("remove_stopwords", false);
            for (const auto& name : j.at("labels")) {
                index.labels_.push_back({name.get<std::string>(), index.labels_.size()});
            }
            index.doc_len_.assign(index.labels_.size(), 0);
            index.has_doc_.assign(index.labels_.size(), false);
            for (const auto& pair : j.at("doc_lens")) {
                const auto doc = pair.at(0).get<std::size_t>();
                if (doc >= index.labels_.size()) {
                    throw Error("corrupt_artifact", "doc_lens references unknown class");
                }
                index.doc_ids_.push_back(doc);
                index.doc_len_[doc] = pair.at(1).get<std::size_t>();
                index.has_doc_[doc] = true;
            }
            const auto& vocab = j.at("vocabulary");
            const auto& postings = j.at("postings");
            if (vocab.size() != postings.size()) {
                throw Error("corrupt_artifact", "vocabulary/postings length mismatch");
            }
            for (std::size_t i = 0; i < vocab.size(); ++i) {
                auto& list = index.postings_[vocab[i].get<std::string>()];
                for (const auto& p : postings[i]) {
                    list.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
                }
            }
            if (j.at("num_docs").get<std::size_t>() != index.doc_ids_.size()) {
                throw Error("corrupt_artifact", "num_docs does not match doc_lens");
            }
        } catch (const json::exception& e) {
            throw Error("corrupt_artifact", std::string("invalid index JSON: ") + e.what());
        }
    } else {
        char magic[sizeof kBinaryMagic];
        in.read(magic, sizeof magic);
        if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kBinaryMagic))) {
            throw Error("corrupt_artifact", "not an advqa index");
        }
        if (const auto v = binio::get_u32(in); v != kFormatVersion) {
            throw Error("unsupported_version", "unsupported index version " + std::to_string(v));
        }
        const auto num_docs = binio::get_u64(in);
        index.options_.k1 = binio::get_f64(in);
        index.options_.b = binio::get_f64(in);
        const auto flags = binio::get_u32(in);
        index.options_.stem = (flags & 1U) != 0;
        index.options_.remove_stopwords = (flags & 2U) != 0;
        const auto num_labels = binio::get_u64(in);
        for (std::uint64_t i = 0; i < num_labels; ++i) {
            index.labels_.push_back({binio::get_string(in), static_cast<std::size_t>(i)});
        }
        index.doc_len_.assign(index.labels_.size(), 0);
        index.has_doc_.assign(index.labels_.size(), false);
        for (std::uint64_t i = 0; i < num_docs; ++i) {
            const auto doc = binio::get_u64(in);
            if (doc >= index.labels_.size()) {
                throw Error("corrupt_artifact", "doc_lens references unknown class");
            }
            index.doc_ids_.push_back(doc);
            index.doc_len_[doc] = binio::get_u64(in);
            index.has_doc_[doc] = true;
        }
        const auto num_terms = binio::get_u64(in);
        for (std::uint64_t i = 0; i < num_terms; ++i) {
            auto term = binio::get_string(in);
            const auto count = binio::get_u64(in);
            auto& list = index.postings_[term];
            list.reserve(count);
            for (std::uint64_t k = 0; k < count; ++k) {
                const auto doc = binio::get_u32(in);
                const auto tf = binio::get_u32(in);
                list.push_back({doc, tf});
            }
        }
    }
    for (const auto& [term, list] : index.postings_) {
        for (const auto& p : list) {
            if (p.doc >= index.labels_.size() || !index.has_doc_[p.doc]) {
                throw Error("corrupt_artifact", "posting for term \"" + term + "\" references unknown document");
            }
        }
    }
    if (index.doc_ids_.empty()) {
        throw Error("corrupt_artifact", "index has no documents");
    }
    index.finalize();
    return index;
}

void InvertedIndex::save(const std::filesystem::path& path, IndexFormat format) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("io_error", "cannot write index " + path.string());
    }
    write(out, format);
    if (!out) {
        throw Error("io_error", "write failed for " + path.string());
    }
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io_error", "cannot open index " + path.string());
    }
    return read(in);
}

} // namespace advqa
