#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "advqa/corpus.hpp"
#include "advqa/embedding.hpp"

namespace advqa {

struct SynthConfig {
    std::size_t num_answers = 10;
    std::size_t per_answer = 20;
    std::uint64_t seed = 7;
    std::size_t filler_vocab = 50;
    std::size_t min_words = 12;
    std::size_t max_words = 20;
    double test_fraction = 0.25;  ///< trailing share of each answer's questions held out
};

/// Desk-scale stand-in corpus: every answer owns one unique trigger word
/// that appears exactly once in each of its questions; every other word is
/// drawn uniformly from a shared filler vocabulary. Questions are split into
/// short capitalized sentences ending in '.'.
struct SynthCorpus {
    Dataset data;
    std::map<std::string, std::string> trigger_of;  ///< answer -> trigger token
    std::vector<std::string> filler;
};

SynthCorpus synth_corpus(const SynthConfig& cfg);

/// Seeded Gaussian vectors: N(0, 1) for triggers, N(0, filler_scale^2) for
/// filler. Short filler vectors mimic pretrained tables, where frequent
/// uninformative words sit near the origin.
EmbeddingTable synth_embeddings(const SynthCorpus& corpus, std::size_t dim, std::uint64_t seed,
                                double filler_scale = 0.1);

/// Replaces every occurrence of each answer's trigger with a token that
/// appears nowhere in the corpus (a paraphrase the models have never
/// seen). Ids get the suffix "-para".
std::vector<Question> paraphrase_triggers(const SynthCorpus& corpus, const std::vector<Question>& qs);

} // namespace advqa
