#include "advqa/synth.hpp"

#include <array>
#include <cctype>
#include <iomanip>
#include <set>
#include <sstream>

#include "advqa/error.hpp"
#include "advqa/rng.hpp"

namespace advqa {
namespace {

constexpr std::array<const char*, 16> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n",
                                              "p", "r", "s", "t", "v", "z", "th", "qu"};
constexpr std::array<const char*, 6> kVowels{"a", "e", "i", "o", "u", "y"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnsets[rng.below(kOnsets.size())];
        w += kVowels[rng.below(kVowels.size())];
    }
    return w;
}

std::string capitalize(std::string w) {
    if (!w.empty()) {
        w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    }
    return w;
}

} // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
    if (cfg.num_answers == 0 || cfg.per_answer == 0) {
        throw Error("invalid_argument", "synthetic corpus needs num_answers > 0 and per_answer > 0");
    }
    if (cfg.min_words < 2 || cfg.max_words < cfg.min_words || cfg.filler_vocab == 0) {
        throw Error("invalid_argument", "synthetic corpus needs 2 <= min_words <= max_words and filler words");
    }
    if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) {
        throw Error("invalid_argument", "test_fraction must lie in [0, 1)");
    }
    Rng rng(cfg.seed);
    SynthCorpus corpus;

    std::set<std::string> used;
    const auto fresh = [&](std::size_t syllables) {
        for (;;) {
            auto w = pseudo_word(rng, syllables);
            if (used.insert(w).second) {
                return w;
            }
        }
    };
    std::vector<std::string> answers;
    std::vector<std::string> triggers;
    for (std::size_t a = 0; a < cfg.num_answers; ++a) {
        answers.push_back(capitalize(fresh(3)) + "_" + capitalize(fresh(2)));
        triggers.push_back(fresh(4));
        corpus.trigger_of[answers.back()] = triggers.back();
    }
    for (std::size_t i = 0; i < cfg.filler_vocab; ++i) {
        corpus.filler.push_back(fresh(2));
    }

    const auto n_test = static_cast<std::size_t>(static_cast<double>(cfg.per_answer) * cfg.test_fraction + 0.5);
    std::vector<Question> questions;
    std::map<std::string, Split> split;
    for (std::size_t a = 0; a < cfg.num_answers; ++a) {
        for (std::size_t k = 0; k < cfg.per_answer; ++k) {
            const std::size_t len = cfg.min_words + rng.below(cfg.max_words - cfg.min_words + 1);
            const std::size_t trigger_at = rng.below(len);
            std::vector<std::string> words(len);
            for (std::size_t i = 0; i < len; ++i) {
                words[i] = i == trigger_at ? triggers[a] : corpus.filler[rng.below(corpus.filler.size())];
            }
            // Sentences of 4..8 words.
            std::string text;
            std::size_t i = 0;
            while (i < len) {
                std::size_t sentence = 4 + rng.below(5);
                if (len - i < sentence + 4) {
                    sentence = len - i;
                }
                for (std::size_t j = 0; j < sentence; ++j, ++i) {
                    if (!text.empty()) {
                        text.push_back(' ');
                    }
                    text += j == 0 ? capitalize(words[i]) : words[i];
                }
                text.push_back('.');
            }
            std::ostringstream id;
            id << "synth-a" << std::setw(3) << std::setfill('0') << a << "-q" << std::setw(3) << k;
            auto q = make_question(id.str(), std::move(text), answers[a]);
            const bool is_test = k >= cfg.per_answer - n_test;
            q.source = is_test ? Source::RegularTest : Source::Training;
            split[q.id] = is_test ? Split::Test : Split::Train;
            questions.push_back(std::move(q));
        }
    }
    corpus.data = Dataset(std::move(questions), std::move(split));
    return corpus;
}

EmbeddingTable synth_embeddings(const SynthCorpus& corpus, std::size_t dim, std::uint64_t seed,
                                double filler_scale) {
    EmbeddingTable table(dim);
    Rng rng(seed);
    const auto add = [&](const std::string& tok, double scale) {
        std::vector<double> v(dim);
        for (auto& x : v) {
            x = scale * rng.normal();
        }
        table.set(tok, std::move(v));
    };
    for (const auto& [answer, trigger] : corpus.trigger_of) {
        add(trigger, 1.0);
    }
    for (const auto& w : corpus.filler) {
        add(w, filler_scale);
    }
    return table;
}

std::vector<Question> paraphrase_triggers(const SynthCorpus& corpus, const std::vector<Question>& qs) {
    std::vector<Question> out;
    out.reserve(qs.size());
    for (const auto& q : qs) {
        std::string text;
        for (const auto& w : analyze_words(q.raw_text)) {
            if (!text.empty()) {
                text.push_back(' ');
            }
            bool replaced = false;
            for (const auto& [answer, trigger] : corpus.trigger_of) {
                if (w.token == trigger) {
                    text += "unseen" + trigger;
                    replaced = true;
                    break;
                }
            }
            if (!replaced) {
                text += w.cased;
            }
            if (w.ends_sentence) {
                text.push_back('.');
            }
        }
        Question p = make_question(q.id + "-para", std::move(text), q.answer.canonical_name, q.category, q.source);
        p.answer = q.answer;
        p.phenomena = q.phenomena;
        p.phenomena.insert(PhenomenonTag::Paraphrase);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace advqa
