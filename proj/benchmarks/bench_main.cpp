#include <benchmark/benchmark.h>

#include "advqa/buzzer.hpp"
#include "advqa/ir_engine.hpp"
#include "advqa/qa_model.hpp"
#include "advqa/rng.hpp"
#include "advqa/saliency.hpp"
#include "advqa/synth.hpp"
#include "advqa/training.hpp"

using namespace advqa;

namespace {

const SynthCorpus& corpus() {
    static const SynthCorpus c = [] {
        SynthConfig cfg;
        cfg.num_answers = 50;
        cfg.per_answer = 20;
        return synth_corpus(cfg);
    }();
    return c;
}

const EmbeddingTable& embeddings() {
    static const EmbeddingTable e = synth_embeddings(corpus(), 50, 7);
    return e;
}

void BM_IndexBuild(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(InvertedIndex::build(corpus().data));
}
BENCHMARK(BM_IndexBuild);

void BM_Bm25Guess(benchmark::State& state) {
    const auto ix = InvertedIndex::build(corpus().data);
    const auto qs = corpus().data.test_questions();
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(ix.guess(qs[i++ % qs.size()].tokens, 5));
}
BENCHMARK(BM_Bm25Guess);

void BM_Forward(benchmark::State& state) {
    const auto arch = static_cast<Arch>(state.range(0));
    const auto clf = Classifier::create({arch, 50, 64, 50, false}, corpus().data.answer_vocab(), 1);
    const auto x = embed_input(embeddings(), corpus().data.questions().front().tokens);
    for (auto _ : state) benchmark::DoNotOptimize(clf.logits(x));
    state.SetLabel(std::string(to_string(arch)));
}
BENCHMARK(BM_Forward)->Arg(static_cast<int>(Arch::DAN))->Arg(static_cast<int>(Arch::GRU));

void BM_Backward(benchmark::State& state) {
    const auto arch = static_cast<Arch>(state.range(0));
    const auto clf = Classifier::create({arch, 50, 64, 50, false}, corpus().data.answer_vocab(), 1);
    const auto x = embed_input(embeddings(), corpus().data.questions().front().tokens);
    std::vector<double> up(50, 0.02);
    for (auto _ : state) benchmark::DoNotOptimize(clf.backward(x, up));
    state.SetLabel(std::string(to_string(arch)));
}
BENCHMARK(BM_Backward)->Arg(static_cast<int>(Arch::DAN))->Arg(static_cast<int>(Arch::GRU));

void BM_BuzzIr(benchmark::State& state) {
    const RetrievalModel ir("ir", std::make_shared<InvertedIndex>(InvertedIndex::build(corpus().data)));
    const auto qs = corpus().data.test_questions();
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(buzz(ir, qs[i++ % qs.size()]));
}
BENCHMARK(BM_BuzzIr);

void BM_TrainEpochDan(benchmark::State& state) {
    TrainConfig cfg;
    cfg.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(train(corpus().data, embeddings(), cfg));
}
BENCHMARK(BM_TrainEpochDan)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
