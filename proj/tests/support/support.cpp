#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#ifndef ADVQA_TEST_DATA_DIR
#error "ADVQA_TEST_DATA_DIR must point at tests/data"
#endif

namespace advqa::test {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(ADVQA_TEST_DATA_DIR) / name; }

TempDir::TempDir(const std::string& tag) {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto p = fs::temp_directory_path() / ("advqa-" + tag + "-" + std::to_string(rd()));
        if (fs::create_directory(p)) {
            path_ = p;
            return;
        }
    }
    throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

BruteBm25::BruteBm25(const Dataset& data, double k1_, double b_) : labels(data.answer_vocab()), k1(k1_), b(b_) {
    for (const auto& q : data.questions()) {
        if (data.split_of(q.id) != Split::Train) {
            continue;
        }
        auto& d = docs[q.answer.class_index];
        d.insert(d.end(), q.tokens.begin(), q.tokens.end());
    }
}

double BruteBm25::idf(const std::string& term) const {
    double df = 0;
    for (const auto& [cls, d] : docs) {
        if (std::find(d.begin(), d.end(), term) != d.end()) {
            df += 1;
        }
    }
    const double n = static_cast<double>(docs.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double BruteBm25::term_weight(const std::string& term, std::size_t cls) const {
    auto it = docs.find(cls);
    if (it == docs.end()) {
        return 0.0;
    }
    const double tf = static_cast<double>(std::count(it->second.begin(), it->second.end(), term));
    if (tf == 0) {
        return 0.0;
    }
    double total = 0;
    for (const auto& [c, d] : docs) {
        total += static_cast<double>(d.size());
    }
    const double avgdl = total / static_cast<double>(docs.size());
    const double dl = static_cast<double>(it->second.size());
    return idf(term) * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * (dl / avgdl)));
}

std::vector<double> BruteBm25::contributions(const TokenSequence& q, std::size_t cls) const {
    std::vector<double> w;
    for (const auto& t : q) {
        w.push_back(term_weight(t, cls));
    }
    return w;
}

double BruteBm25::score(const TokenSequence& q, std::size_t cls) const {
    double s = 0;
    for (double w : contributions(q, cls)) {
        s += w;
    }
    return s;
}

std::vector<std::pair<std::size_t, double>> BruteBm25::ranking(const TokenSequence& q, std::size_t k) const {
    std::vector<std::pair<std::size_t, double>> all;
    for (const auto& [cls, d] : docs) {
        all.emplace_back(cls, score(q, cls));
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) {
            return x.second > y.second;
        }
        return x.first < y.first;
    });
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

// ---------------------------------------------------------------------------

ScriptedModel::ScriptedModel(std::string id, std::vector<AnswerLabel> labels,
                             std::map<std::string, std::vector<std::size_t>> script)
    : id_(std::move(id)), labels_(std::move(labels)), script_(std::move(script)) {}

GuessList ScriptedModel::guess(const TokenSequence& query, std::size_t k) const {
    ++calls_;
    if (query.empty() || k == 0) {
        return {};
    }
    auto it = script_.find(query.front());
    if (it == script_.end() || query.size() > it->second.size()) {
        return {};
    }
    const std::size_t cls = it->second[query.size() - 1];
    if (cls == kNone) {
        return {};
    }
    return {Guess{labels_.at(cls), 1.0}};
}

EvidenceMap ScriptedModel::evidence(const TokenSequence& query, std::size_t) const {
    return {std::vector<double>(query.size(), 0.0), EvidenceNormalization::Raw};
}

ConstantModel::ConstantModel(std::string id, std::vector<AnswerLabel> labels,
                             std::function<std::size_t(const TokenSequence&)> f)
    : id_(std::move(id)), labels_(std::move(labels)), f_(std::move(f)) {}

GuessList ConstantModel::guess(const TokenSequence& query, std::size_t k) const {
    if (k == 0) {
        return {};
    }
    return {Guess{labels_.at(f_(query)), 1.0}};
}

std::vector<AnswerLabel> make_labels(std::size_t n) {
    std::vector<AnswerLabel> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"ans" + std::to_string(i), i});
    }
    return out;
}

Question scripted_question(const std::string& tag, std::size_t n, std::size_t gold,
                           const std::vector<AnswerLabel>& labels) {
    std::string text = tag;
    for (std::size_t i = 1; i < n; ++i) {
        text += " w" + std::to_string(i);
    }
    Question q = make_question(tag, text, labels.at(gold).canonical_name);
    q.answer = labels.at(gold);
    return q;
}

// ---------------------------------------------------------------------------

double central_difference(const std::function<double()>& f, double& x, double h) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(na) + std::sqrt(nb);
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

namespace {

double at(const Classifier& clf, const std::string& seg, std::size_t r, std::size_t c) {
    const auto& s = clf.segment(seg);
    return clf.params()[s.offset + r * s.cols + c];
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::vector<double> gru_final(const Classifier& clf, const std::string& p, const InputMatrix& x, bool reverse) {
    const std::size_t H = clf.shape().hidden;
    const std::size_t d = x.dim;
    std::vector<double> h(H, 0.0);
    for (std::size_t k = 0; k < x.rows; ++k) {
        const std::size_t t = reverse ? x.rows - 1 - k : k;
        std::vector<double> z(H), r(H), nh(H);
        for (std::size_t i = 0; i < H; ++i) {
            double az = at(clf, p + ".b", i, 0), ar = at(clf, p + ".b", H + i, 0);
            for (std::size_t j = 0; j < d; ++j) {
                az += at(clf, p + ".W", i, j) * x.values[t * d + j];
                ar += at(clf, p + ".W", H + i, j) * x.values[t * d + j];
            }
            for (std::size_t j = 0; j < H; ++j) {
                az += at(clf, p + ".U", i, j) * h[j];
                ar += at(clf, p + ".U", H + i, j) * h[j];
            }
            z[i] = sig(az);
            r[i] = sig(ar);
        }
        for (std::size_t i = 0; i < H; ++i) {
            double an = at(clf, p + ".b", 2 * H + i, 0);
            for (std::size_t j = 0; j < d; ++j) {
                an += at(clf, p + ".W", 2 * H + i, j) * x.values[t * d + j];
            }
            for (std::size_t j = 0; j < H; ++j) {
                an += at(clf, p + ".U", 2 * H + i, j) * (r[j] * h[j]);
            }
            nh[i] = (1.0 - z[i]) * std::tanh(an) + z[i] * h[i];
        }
        h = nh;
    }
    return h;
}

}  // namespace

std::vector<double> reference_logits(const Classifier& clf, const InputMatrix& x) {
    const auto& shape = clf.shape();
    std::vector<double> feat;
    switch (shape.arch) {
    case Arch::DAN: {
        std::vector<double> avg(x.dim, 0.0);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < x.dim; ++j) {
                avg[j] += x.values[t * x.dim + j] / static_cast<double>(x.rows);
            }
        }
        for (std::size_t i = 0; i < shape.hidden; ++i) {
            double a = at(clf, "hidden.b", i, 0);
            for (std::size_t j = 0; j < x.dim; ++j) {
                a += at(clf, "hidden.W", i, j) * avg[j];
            }
            feat.push_back(std::tanh(a));
        }
        break;
    }
    case Arch::GRU: {
        feat = gru_final(clf, "fwd", x, false);
        if (shape.bidirectional) {
            auto b = gru_final(clf, "bwd", x, true);
            feat.insert(feat.end(), b.begin(), b.end());
        }
        break;
    }
    case Arch::LinearBow:
        feat.assign(x.dim, 0.0);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t j = 0; j < x.dim; ++j) {
                feat[j] += x.values[t * x.dim + j];
            }
        }
        break;
    }
    std::vector<double> out;
    for (std::size_t c = 0; c < shape.num_classes; ++c) {
        double v = at(clf, "out.b", c, 0);
        for (std::size_t j = 0; j < feat.size(); ++j) {
            v += at(clf, "out.W", c, j) * feat[j];
        }
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

using u128 = unsigned __int128;

u128 choose(std::uint64_t n, std::uint64_t k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    u128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;  // exact: r * (n-k+i) is divisible by i at every step
    }
    return r;
}

}  // namespace

double fisher_enumeration(const Table2x2& t) {
    const std::uint64_t r1 = t[0][0] + t[0][1];
    const std::uint64_t r2 = t[1][0] + t[1][1];
    const std::uint64_t c1 = t[0][0] + t[1][0];
    const std::uint64_t n = r1 + r2;
    // C(120, 60) < 2^117; beyond that the exact numerators may not fit.
    if (n > 120) {
        throw std::domain_error("fisher_enumeration: table total above 120");
    }
    // P(a) = C(r1, a) C(r2, c1 - a) / C(n, c1); compare numerators exactly.
    const u128 observed = choose(r1, t[0][0]) * choose(r2, c1 - t[0][0]);
    const u128 total = choose(n, c1);
    u128 tail = 0;
    const std::uint64_t lo = c1 > r2 ? c1 - r2 : 0;
    const std::uint64_t hi = std::min(r1, c1);
    for (std::uint64_t a = lo; a <= hi; ++a) {
        const u128 p = choose(r1, a) * choose(r2, c1 - a);
        if (p <= observed) {
            tail += p;
        }
    }
    return static_cast<double>(static_cast<long double>(tail) / static_cast<long double>(total));
}

// ---------------------------------------------------------------------------

std::vector<const Question*> same_answer_training(const Question& q, const Dataset& train) {
    std::vector<const Question*> out;
    for (const auto& t : train.questions()) {
        if (train.split_of(t.id) == Split::Train && t.answer.canonical_name == q.answer.canonical_name) {
            out.push_back(&t);
        }
    }
    return out;
}

double brute_ngram_overlap(const Question& q, const Dataset& train, std::size_t n) {
    std::set<TokenSequence> grams;
    for (std::size_t i = 0; i + n <= q.tokens.size(); ++i) {
        grams.insert(TokenSequence(q.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   q.tokens.begin() + static_cast<std::ptrdiff_t>(i + n)));
    }
    std::size_t hit = 0;
    const auto refs = same_answer_training(q, train);
    for (const auto& g : grams) {
        bool found = false;
        for (const auto* r : refs) {
            if (std::search(r->tokens.begin(), r->tokens.end(), g.begin(), g.end()) != r->tokens.end()) {
                found = true;
                break;
            }
        }
        hit += found ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(grams.size());
}

std::size_t brute_longest_overlap(const Question& q, const Dataset& train) {
    std::size_t best = 0;
    const auto refs = same_answer_training(q, train);
    for (std::size_t i = 0; i < q.tokens.size(); ++i) {
        for (std::size_t j = i + 1; j <= q.tokens.size(); ++j) {
            for (const auto* r : refs) {
                if (std::search(r->tokens.begin(), r->tokens.end(), q.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                q.tokens.begin() + static_cast<std::ptrdiff_t>(j)) != r->tokens.end()) {
                    best = std::max(best, j - i);
                    break;
                }
            }
        }
    }
    return best;
}

std::vector<std::string> brute_entities(const std::string& raw_text) {
    std::istringstream in(raw_text);
    std::vector<std::string> words;
    for (std::string w; in >> w;) {
        words.push_back(w);
    }
    std::vector<std::string> out;
    std::string current;
    bool sentence_start = true;
    for (const auto& w : words) {
        const char last = w.back();
        const bool ends = last == '.' || last == '?' || last == '!';
        const bool punct = std::ispunct(static_cast<unsigned char>(last)) != 0;
        // lowercase with internal punctuation (other than - and ') removed
        std::string core;
        std::size_t b = 0, e = w.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(w[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1]))) --e;
        for (std::size_t i = b; i < e; ++i) {
            const char c = w[i];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\'') {
                core.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            }
        }
        const bool cap = b < e && std::isupper(static_cast<unsigned char>(w[b]));
        if (!sentence_start && cap && !core.empty()) {
            current += current.empty() ? core : " " + core;
            if (punct) {
                out.push_back(current);
                current.clear();
            }
        } else if (!current.empty()) {
            out.push_back(current);
            current.clear();
        }
        sentence_start = ends;
    }
    if (!current.empty()) {
        out.push_back(current);
    }
    return out;
}

}  // namespace advqa::test
