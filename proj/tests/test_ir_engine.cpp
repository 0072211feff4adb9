#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include <cmath>
#include <sstream>

#include "advqa/error.hpp"
#include "advqa/ir_engine.hpp"
#include "advqa/rng.hpp"
#include "support.hpp"

using namespace advqa;

namespace {

Dataset tiny(std::vector<std::pair<std::string, std::string>> rows) {
    std::vector<Question> qs;
    int i = 0;
    for (auto& [text, answer] : rows) {
        qs.push_back(make_question("q" + std::to_string(i++), text, answer));
    }
    return Dataset(std::move(qs));
}

TokenSequence random_query(Rng& rng, const std::vector<std::string>& vocab, std::size_t max_len) {
    TokenSequence q;
    const auto n = rng.below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) {
        q.push_back(vocab[rng.below(vocab.size())]);
    }
    return q;
}

std::vector<std::string> vocabulary_of(const Dataset& d) {
    std::set<std::string> v;
    for (const auto& q : d.questions()) {
        v.insert(q.tokens.begin(), q.tokens.end());
    }
    std::vector<std::string> out(v.begin(), v.end());
    out.push_back("never-seen");
    return out;
}

}  // namespace

TEST_CASE("build_index counts") {
    const auto two = tiny({{"a b c d e", "A"}, {"a f g h i", "B"}});
    const auto ix = InvertedIndex::build(two);
    CHECK(ix.num_docs() == 2);
    CHECK(ix.avg_doc_len() == 5.0);
    // token in both documents of a two-document index
    CHECK(ix.idf("a") == doctest::Approx(std::log(1.0 + 0.5 / 2.5)));
    CHECK(ix.idf("a") == doctest::Approx(0.1823).epsilon(1e-4));
    CHECK(ix.idf("a") > 0.0);

    const auto concat = tiny({{"w x y z", "A"}, {"p q r s t u", "A"}, {"k", "B"}});
    const auto ix2 = InvertedIndex::build(concat);
    CHECK(ix2.doc_len(0) == 10);

    CHECK_THROWS_AS(InvertedIndex::build(Dataset{}), Error);
}

TEST_CASE("postings are sorted by class index") {
    const auto ix = InvertedIndex::build(load_dataset(test::data_path("hand30.jsonl")));
    for (const auto& [term, list] : ix.all_postings()) {
        for (std::size_t i = 1; i < list.size(); ++i) {
            CHECK(list[i - 1].doc < list[i].doc);
        }
        for (const auto& p : list) {
            CHECK(p.tf > 0);
        }
    }
}

TEST_CASE("score examples") {
    const auto d = tiny({{"alpha beta gamma", "A"}, {"delta epsilon", "B"}});
    const auto ix = InvertedIndex::build(d);
    CHECK(ix.score({"zeta", "eta"}, 0) == 0.0);
    CHECK_THROWS_AS(ix.score({"alpha"}, 7), Error);

    const test::BruteBm25 oracle(d);
    const TokenSequence whole{"alpha", "beta", "gamma"};
    CHECK(ix.score(whole, 0) == doctest::Approx(oracle.score(whole, 0)).epsilon(1e-12));
    // repeated query term: oracle sums over positions
    CHECK(ix.score({"alpha", "alpha"}, 0) == doctest::Approx(oracle.score({"alpha", "alpha"}, 0)).epsilon(1e-12));
}

TEST_CASE("single-document index") {
    const auto d = tiny({{"one two two three", "Only"}});
    const auto ix = InvertedIndex::build(d);
    const test::BruteBm25 oracle(d);
    const TokenSequence q{"one", "two", "two", "three"};
    CHECK(ix.score(q, 0) == doctest::Approx(oracle.score(q, 0)).epsilon(1e-12));
    CHECK(ix.score(q, 0) > 0.0);
}

TEST_CASE("guess examples") {
    const auto d = tiny({{"trig1 common", "A"}, {"trig2 common", "B"}, {"trig3 common", "C"}});
    const auto ix = InvertedIndex::build(d);
    CHECK(ix.guess({"common", "trig2"}, 1).front().answer.canonical_name == "B");

    const auto empty = ix.guess({}, 5);
    REQUIRE(empty.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(empty[i].score == 0.0);
        CHECK(empty[i].answer.class_index == i);
    }
    // equal scores on a two-answer index go to the lower class index
    const auto tie = InvertedIndex::build(tiny({{"x", "A"}, {"x", "B"}}));
    CHECK(tie.guess({"x"}, 1).front().answer.class_index == 0);
}

TEST_CASE("highlight examples") {
    const auto d = tiny({{"red green blue", "A"}, {"cyan magenta", "B"}});
    const auto ix = InvertedIndex::build(d);
    const auto ev = ix.highlight({"red", "cyan", "blue"}, 0);
    REQUIRE(ev.weights.size() == 3);
    CHECK(ev.weights[1] == 0.0);
    CHECK(ev.weights[0] + ev.weights[1] + ev.weights[2] == doctest::Approx(ix.score({"red", "cyan", "blue"}, 0)).epsilon(1e-9));
    CHECK(ix.highlight({"red"}, 0).weights.front() == ix.score({"red"}, 0));
    CHECK(ev.normalization == EvidenceNormalization::Raw);
    CHECK_THROWS_AS(ix.highlight({"red"}, 2), Error);
}

TEST_CASE("brute-force oracle on the fixture corpus") {
    const auto d = load_dataset(test::data_path("hand30.jsonl"));
    const auto ix = InvertedIndex::build(d);
    const test::BruteBm25 oracle(d);
    const auto vocab = vocabulary_of(d);
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto q = random_query(rng, vocab, 12);
        const auto ranked = oracle.ranking(q, 1000);
        const auto got = ix.guess(q, 1000);
        REQUIRE(got.size() == ranked.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].answer.class_index == ranked[i].first);
            CHECK(got[i].score == doctest::Approx(ranked[i].second).epsilon(1e-12));
        }
        for (auto cls : ix.document_ids()) {
            const auto w = ix.highlight(q, cls).weights;
            const auto o = oracle.contributions(q, cls);
            for (std::size_t i = 0; i < q.size(); ++i) {
                CHECK(w[i] == doctest::Approx(o[i]).epsilon(1e-12));
                CHECK(w[i] >= 0.0);
            }
        }
    }
}

TEST_CASE("properties") {
    const auto d = load_dataset(test::data_path("hand30.jsonl"));
    const auto ix = InvertedIndex::build(d);
    const auto vocab = vocabulary_of(d);
    Rng rng(17);

    SUBCASE("additivity") {
        for (int trial = 0; trial < 200; ++trial) {
            const auto q = random_query(rng, vocab, 15);
            for (auto cls : ix.document_ids()) {
                double sum = 0;
                for (double w : ix.highlight(q, cls).weights) sum += w;
                const double s = ix.score(q, cls);
                CHECK(std::abs(sum - s) <= 1e-9 * std::max(1.0, std::abs(s)));
            }
        }
    }
    SUBCASE("appending a matching token never lowers the score") {
        for (int trial = 0; trial < 200; ++trial) {
            auto q = random_query(rng, vocab, 10);
            const auto cls = ix.document_ids()[rng.below(ix.document_ids().size())];
            const double before = ix.score(q, cls);
            // any term whose postings include cls
            for (const auto& [term, list] : ix.all_postings()) {
                if (std::any_of(list.begin(), list.end(), [&](const Posting& p) { return p.doc == cls; })) {
                    q.push_back(term);
                    break;
                }
            }
            CHECK(ix.score(q, cls) >= before);
        }
    }
    SUBCASE("paraphrase blindness") {
        for (int trial = 0; trial < 50; ++trial) {
            auto q = random_query(rng, vocab, 10);
            for (auto& t : q) t = "zz-unseen-" + t;
            for (auto cls : ix.document_ids()) CHECK(ix.score(q, cls) == 0.0);
        }
    }
    SUBCASE("permuted training order gives identical scores") {
        auto qs = d.questions();
        rng.shuffle(qs);
        const auto ix2 = InvertedIndex::build(Dataset(qs, d.split()));
        CHECK(ix2 == ix);
        for (int trial = 0; trial < 50; ++trial) {
            const auto q = random_query(rng, vocab, 10);
            for (auto cls : ix.document_ids()) CHECK(ix2.score(q, cls) == ix.score(q, cls));
        }
    }
}

TEST_CASE("answers without training questions own no document") {
    const auto d = load_dataset(test::data_path("hand30.jsonl"));
    const auto ix = InvertedIndex::build(d);
    CHECK(ix.num_docs() == 30);
    CHECK(ix.labels().size() == 32);
    const auto zz = d.find_answer("Answer_ZZ")->class_index;
    CHECK_FALSE(ix.has_document(zz));
    CHECK(ix.score({"river"}, zz) == 0.0);
    for (const auto& g : ix.guess({"river"}, 100)) CHECK(g.answer.class_index != zz);
}

TEST_CASE("stemming and stopwords") {
    const auto d = tiny({{"the rivers of cities", "A"}, {"a river and a city", "B"}});
    IndexOptions opts;
    opts.stem = true;
    opts.remove_stopwords = true;
    const auto ix = InvertedIndex::build(d, opts);
    CHECK(ix.index_term("rivers") == std::optional<std::string>("river"));
    CHECK(ix.index_term("the") == std::nullopt);
    CHECK(ix.document_frequency("river") == 2);
    CHECK(ix.postings("the") == nullptr);
    CHECK(ix.highlight({"the", "river"}, 0).weights[0] == 0.0);
}

TEST_CASE("serialization round-trips") {
    const auto d = load_dataset(test::data_path("hand30.jsonl"));
    IndexOptions opts;
    opts.k1 = 1.5;
    opts.stem = true;
    const auto ix = InvertedIndex::build(d, opts);
    test::TempDir dir("ir");
    for (auto fmt : {IndexFormat::Json, IndexFormat::Binary}) {
        const auto p = dir / (fmt == IndexFormat::Json ? "ix.json" : "ix.bin");
        ix.save(p, fmt);
        const auto back = InvertedIndex::load(p);
        CHECK(back == ix);
        CHECK(back.options() == ix.options());
        CHECK(back.avg_doc_len() == ix.avg_doc_len());
        for (const auto& [term, list] : ix.all_postings()) {
            CHECK(back.idf(term) == ix.idf(term));  // bit-exact
        }
        std::ostringstream a, b;
        ix.write(a, fmt);
        back.write(b, fmt);
        CHECK(a.str() == b.str());
    }
    CHECK_THROWS_AS(InvertedIndex::load(dir / "missing.json"), Error);
    {
        std::ofstream f(dir / "junk.bin");
        f << "ADVQAIDX\x07garbage";
    }
    CHECK_THROWS_AS(InvertedIndex::load(dir / "junk.bin"), Error);
}
