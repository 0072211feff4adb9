// advqa: command-line driver for the adversarial QA toolkit.
//
//   advqa synth    --out corpus.jsonl [--emb-out emb.txt]
//   advqa index    --data corpus.jsonl --out ir.json
//   advqa train    --data corpus.jsonl --emb emb.txt --out dan.clf
//   advqa eval     --model ir=ir.json --model dan=dan.clf,emb.txt --set test=corpus.jsonl --out results/
//   advqa analyze  --test adv.jsonl --train corpus.jsonl --out report
//   advqa validate --data drafts.jsonl --train corpus.jsonl
//   advqa serve    --model ir=ir.json --train corpus.jsonl --data-dir sessions/
//
// Each run prints its resolved configuration as one JSON line on stderr.
// That line can be fed back through --config; values from the config file
// win over command-line flags.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <pthread.h>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advqa/analysis.hpp"
#include "advqa/authoring.hpp"
#include "advqa/buzzer.hpp"
#include "advqa/classifier.hpp"
#include "advqa/corpus.hpp"
#include "advqa/embedding.hpp"
#include "advqa/error.hpp"
#include "advqa/http_api.hpp"
#include "advqa/ir_engine.hpp"
#include "advqa/qa_model.hpp"
#include "advqa/synth.hpp"
#include "advqa/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SynthOpts {
    std::uint64_t seed = 7;
    std::string out;
    std::size_t answers = 10;
    std::size_t per_answer = 20;
    std::size_t filler_vocab = 50;
    std::size_t min_words = 12;
    std::size_t max_words = 20;
    double test_fraction = 0.25;
    std::string emb_out;
    std::size_t emb_dim = 50;
    double filler_scale = 0.1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthOpts, seed, out, answers, per_answer, filler_vocab, min_words,
                                                max_words, test_fraction, emb_out, emb_dim, filler_scale)

struct IndexOpts {
    std::uint64_t seed = 0;  // unused; kept so every command accepts --seed
    std::string out;
    std::string data;
    std::string format = "json";
    double k1 = 1.2;
    double b = 0.75;
    bool stem = false;
    bool stopwords = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IndexOpts, seed, out, data, format, k1, b, stem, stopwords)

struct TrainOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::string data;
    std::string emb;
    std::string arch = "dan";
    std::size_t epochs = 20;
    std::size_t batch = 32;
    double lr = 1e-3;
    std::size_t hidden = 64;
    double dropout_keep = 1.0;
    bool bidirectional = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainOpts, seed, out, data, emb, arch, epochs, batch, lr, hidden,
                                                dropout_keep, bidirectional)

struct EvalOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::string> models;
    std::vector<std::string> sets;
    std::string split = "all";
    std::size_t grid_steps = 20;
    std::string granularity = "word";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalOpts, seed, out, models, sets, split, grid_steps, granularity)

struct AnalyzeOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::string test;
    std::string train;
    std::string split = "all";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AnalyzeOpts, seed, out, test, train, split)

struct ValidateOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::string data;
    std::string train;
    std::string blocklist;
    std::size_t min_tokens = 10;
    std::size_t max_tokens = 200;
    double dup_threshold = 0.8;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ValidateOpts, seed, out, data, train, blocklist, min_tokens,
                                                max_tokens, dup_threshold)

struct ServeOpts {
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::string> models;
    std::string train;
    std::string data_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string granularity = "sentence";
    std::string evidence = "top";
    std::size_t guesses = 5;
    std::string blocklist;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ServeOpts, seed, out, models, train, data_dir, host, port,
                                                granularity, evidence, guesses, blocklist)

// Applies the --config file on top of the flag values and logs the result.
template <class Opts>
Opts resolve(const std::string& command, const Opts& from_flags, const std::string& config_path) {
    json resolved = from_flags;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw advqa::Error("io_error", "cannot open config " + config_path);
        }
        json patch;
        try {
            patch = json::parse(in);
        } catch (const json::exception& e) {
            throw advqa::Error("bad_config", config_path + ": " + e.what());
        }
        if (!patch.is_object()) {
            throw advqa::Error("bad_config", config_path + ": expected a JSON object");
        }
        if (patch.contains("command")) {
            if (patch["command"] != command) {
                throw advqa::Error("bad_config",
                                   config_path + " is for command " + patch["command"].dump() + ", not " + command);
            }
            patch.erase("command");
        }
        for (const auto& [key, _] : patch.items()) {
            if (!resolved.contains(key)) {
                throw advqa::Error("bad_config", config_path + ": unknown key \"" + key + "\"");
            }
        }
        resolved.merge_patch(patch);
    }
    Opts opts;
    try {
        opts = resolved.get<Opts>();
    } catch (const json::exception& e) {
        throw advqa::Error("bad_config", config_path + ": " + e.what());
    }
    json log = opts;
    log["command"] = command;
    std::cerr << log.dump() << '\n';
    return opts;
}

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw advqa::Error("bad_arguments", what);
    }
}

std::vector<advqa::Question> select_split(const advqa::Dataset& data, const std::string& split) {
    if (split == "all") {
        return data.questions();
    }
    if (split == "train") {
        return data.train_questions();
    }
    if (split == "test") {
        return data.test_questions();
    }
    throw advqa::Error("bad_arguments", "split must be all, train or test, got " + split);
}

advqa::Granularity granularity_of(const std::string& s) {
    auto g = advqa::parse_granularity(s);
    require(g.has_value(), "granularity must be word or sentence, got " + s);
    return *g;
}

// "ID=PATH" or "ID=PATH,EMBEDDINGS"
std::shared_ptr<const advqa::QAModel> load_model_spec(const std::string& spec) {
    auto eq = spec.find('=');
    require(eq != std::string::npos && eq > 0 && eq + 1 < spec.size(),
            "model spec must look like ID=PATH[,EMBEDDINGS]: " + spec);
    std::string id = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    std::string emb;
    if (auto comma = rest.find(','); comma != std::string::npos) {
        emb = rest.substr(comma + 1);
        rest.resize(comma);
    }
    return advqa::load_model_artifact(id, rest, emb);
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw advqa::Error("io_error", "cannot write " + p.string());
    }
    return out;
}

void emit(bool as_json, const json& summary, const std::string& text) {
    if (as_json) {
        std::cout << summary.dump() << '\n';
    } else {
        std::cout << text << '\n';
    }
}

// ---------------------------------------------------------------------------

void cmd_synth(const SynthOpts& o, bool as_json) {
    require(!o.out.empty(), "synth needs --out");
    advqa::SynthConfig cfg;
    cfg.num_answers = o.answers;
    cfg.per_answer = o.per_answer;
    cfg.seed = o.seed;
    cfg.filler_vocab = o.filler_vocab;
    cfg.min_words = o.min_words;
    cfg.max_words = o.max_words;
    cfg.test_fraction = o.test_fraction;
    auto corpus = advqa::synth_corpus(cfg);
    advqa::save_dataset(o.out, corpus.data);
    if (!o.emb_out.empty()) {
        advqa::synth_embeddings(corpus, o.emb_dim, o.seed, o.filler_scale).save(o.emb_out);
    }
    emit(as_json,
         {{"questions", corpus.data.size()},
          {"answers", corpus.data.answer_vocab().size()},
          {"test", corpus.data.test_questions().size()}},
         "wrote " + std::to_string(corpus.data.size()) + " questions over " +
             std::to_string(corpus.data.answer_vocab().size()) + " answers to " + o.out);
}

void cmd_index(const IndexOpts& o, bool as_json) {
    require(!o.data.empty() && !o.out.empty(), "index needs --data and --out");
    advqa::IndexFormat format;
    if (o.format == "json") {
        format = advqa::IndexFormat::Json;
    } else if (o.format == "binary") {
        format = advqa::IndexFormat::Binary;
    } else {
        throw advqa::Error("bad_arguments", "format must be json or binary, got " + o.format);
    }
    auto data = advqa::load_dataset(o.data);
    advqa::IndexOptions io;
    io.k1 = o.k1;
    io.b = o.b;
    io.stem = o.stem;
    io.remove_stopwords = o.stopwords;
    auto index = advqa::InvertedIndex::build(data, io);
    index.save(o.out, format);
    emit(as_json,
         {{"num_docs", index.num_docs()},
          {"vocabulary", index.all_postings().size()},
          {"avg_doc_len", index.avg_doc_len()}},
         "indexed " + std::to_string(index.num_docs()) + " documents, " +
             std::to_string(index.all_postings().size()) + " terms -> " + o.out);
}

void cmd_train(const TrainOpts& o, bool as_json) {
    require(!o.data.empty() && !o.emb.empty() && !o.out.empty(), "train needs --data, --emb and --out");
    auto arch = advqa::parse_arch(o.arch);
    require(arch.has_value(), "unknown architecture " + o.arch);
    auto data = advqa::load_dataset(o.data);
    auto emb = advqa::EmbeddingTable::load(o.emb);
    advqa::TrainConfig cfg;
    cfg.arch = *arch;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.learning_rate = o.lr;
    cfg.seed = o.seed;
    cfg.hidden = o.hidden;
    cfg.dropout_keep = o.dropout_keep;
    cfg.bidirectional = o.bidirectional;
    advqa::TrainReport report;
    auto clf = advqa::train(data, emb, cfg, &report);
    clf.save(o.out);
    double final_loss = report.epoch_loss.empty() ? report.initial_loss : report.epoch_loss.back();
    auto test = data.test_questions();
    json summary = {{"initial_loss", report.initial_loss}, {"final_loss", final_loss}, {"epoch_loss", report.epoch_loss}};
    std::ostringstream text;
    text << "final train loss " << final_loss;
    if (!test.empty()) {
        double acc = advqa::accuracy(clf, emb, test);
        summary["test_accuracy"] = acc;
        text << ", held-out accuracy " << acc;
    }
    emit(as_json, summary, text.str());
}

void cmd_eval(const EvalOpts& o, bool as_json) {
    require(!o.models.empty(), "eval needs at least one --model");
    require(!o.sets.empty(), "eval needs at least one --set");
    require(!o.out.empty(), "eval needs --out (a directory)");
    require(o.grid_steps > 0, "grid-steps must be positive");
    auto g = granularity_of(o.granularity);

    std::vector<std::shared_ptr<const advqa::QAModel>> owned;
    std::vector<const advqa::QAModel*> models;
    for (const auto& spec : o.models) {
        owned.push_back(load_model_spec(spec));
        models.push_back(owned.back().get());
    }
    std::vector<advqa::QuestionSet> sets;
    for (const auto& spec : o.sets) {
        auto eq = spec.find('=');
        require(eq != std::string::npos && eq > 0, "set spec must look like NAME=PATH: " + spec);
        auto qs = select_split(advqa::load_dataset(spec.substr(eq + 1)), o.split);
        if (qs.empty()) {
            throw advqa::Error("empty_set", "question set " + spec.substr(0, eq) + " has no " + o.split + " questions");
        }
        sets.push_back({spec.substr(0, eq), std::move(qs)});
    }

    auto grid = advqa::default_grid(o.grid_steps);
    std::vector<advqa::CurveRecord> curves;
    for (const auto* m : models) {
        for (const auto& s : sets) {
            curves.push_back({m->id(), s.name, advqa::accuracy_curve(*m, s.questions, grid, g)});
        }
    }
    auto table = advqa::transfer_table(models, sets);

    fs::path dir(o.out);
    fs::create_directories(dir);
    {
        auto f = open_out(dir / "curves.csv");
        advqa::write_curves_csv(f, curves);
    }
    {
        auto f = open_out(dir / "curves.json");
        advqa::write_curves_json(f, curves);
    }
    {
        auto f = open_out(dir / "transfer.csv");
        advqa::write_transfer_csv(f, table);
    }
    {
        auto f = open_out(dir / "transfer.json");
        advqa::write_transfer_json(f, table, g);
    }

    std::ostringstream text;
    for (std::size_t i = 0; i < table.models.size(); ++i) {
        for (std::size_t j = 0; j < table.sets.size(); ++j) {
            text << table.models[i] << " on " << table.sets[j] << ": " << table.accuracy[i][j] << '\n';
        }
    }
    std::string t = text.str();
    t.pop_back();
    emit(as_json, {{"models", table.models}, {"sets", table.sets}, {"accuracy", table.accuracy}}, t);
}

void cmd_analyze(const AnalyzeOpts& o, bool as_json) {
    require(!o.test.empty() && !o.train.empty() && !o.out.empty(), "analyze needs --test, --train and --out");
    auto train = advqa::load_dataset(o.train);
    auto qs = select_split(advqa::load_dataset(o.test), o.split);
    if (qs.empty()) {
        throw advqa::Error("empty_set", "test set " + o.test + " has no " + o.split + " questions");
    }
    auto report = advqa::overlap_report(qs, train);
    {
        auto f = open_out(o.out + ".json");
        advqa::write_report_json(f, report);
    }
    {
        auto f = open_out(o.out + ".csv");
        advqa::write_report_csv(f, report);
    }
    std::ostringstream text;
    text << "unigram " << report.unigram_overlap << ", bigram " << report.bigram_overlap << ", longest "
         << report.longest_ngram_overlap << ", entity " << report.ne_overlap << " over " << report.n_questions
         << " questions";
    emit(as_json,
         {{"unigram_overlap", report.unigram_overlap},
          {"bigram_overlap", report.bigram_overlap},
          {"n_questions", report.n_questions}},
         text.str());
}

void cmd_validate(const ValidateOpts& o, bool as_json) {
    require(!o.data.empty() && !o.train.empty(), "validate needs --data and --train");
    auto train = advqa::load_dataset(o.train);
    auto subs = advqa::load_dataset(o.data);
    advqa::ValidationPolicy policy;
    policy.min_tokens = o.min_tokens;
    policy.max_tokens = o.max_tokens;
    policy.dup_threshold = o.dup_threshold;
    if (!o.blocklist.empty()) {
        policy.blocklist = advqa::load_blocklist(o.blocklist);
    }

    std::ofstream file;
    if (!o.out.empty()) {
        file = open_out(o.out);
    }
    std::ostream& out = o.out.empty() ? std::cout : file;

    // Submissions are checked in file order against those accepted before them.
    std::vector<advqa::Question> accepted;
    std::size_t n_rejected = 0;
    for (const auto& q : subs.questions()) {
        auto v = advqa::validate_submission(q, train, policy, accepted);
        json row = {{"id", q.id}, {"accepted", v.accepted()}};
        if (v.reason) {
            row["reason"] = advqa::to_string(*v.reason);
            ++n_rejected;
        }
        if (!v.matched_id.empty()) {
            row["matched_id"] = v.matched_id;
        }
        out << row.dump() << '\n';
        if (v.accepted()) {
            accepted.push_back(q);
        }
    }
    if (!o.out.empty()) {
        emit(as_json, {{"accepted", accepted.size()}, {"rejected", n_rejected}},
             std::to_string(accepted.size()) + " accepted, " + std::to_string(n_rejected) + " rejected");
    }
}

void cmd_serve(const ServeOpts& o, bool as_json) {
    require(!o.models.empty(), "serve needs at least one --model");
    require(!o.train.empty(), "serve needs --train");
    std::vector<std::shared_ptr<const advqa::QAModel>> models;
    for (const auto& spec : o.models) {
        models.push_back(load_model_spec(spec));
    }
    auto train = std::make_shared<const advqa::Dataset>(advqa::load_dataset(o.train));

    advqa::ServiceConfig cfg;
    cfg.data_dir = o.data_dir;
    cfg.default_granularity = granularity_of(o.granularity);
    cfg.guesses_shown = o.guesses;
    if (o.evidence == "top") {
        cfg.evidence_target = advqa::EvidenceTarget::TopGuess;
    } else if (o.evidence == "answer") {
        cfg.evidence_target = advqa::EvidenceTarget::ChosenAnswer;
    } else {
        throw advqa::Error("bad_arguments", "evidence must be top or answer, got " + o.evidence);
    }
    if (!o.blocklist.empty()) {
        cfg.policy.blocklist = advqa::load_blocklist(o.blocklist);
    }

    // Signals are taken synchronously by this thread; server threads inherit the mask.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    advqa::AuthoringService service(std::move(models), train, cfg);
    advqa::HttpServer server(service);
    int port = server.bind(o.host, o.port);
    std::thread loop([&] { server.run(); });
    server.wait_until_ready();
    emit(as_json, {{"host", o.host}, {"port", port}}, "listening on " + o.host + ":" + std::to_string(port));
    std::cout.flush();

    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
    loop.join();
    // `service` goes out of scope here, closing every session log.
}

int fail(bool as_json, const std::string& code, const std::string& message) {
    if (as_json) {
        std::cerr << json{{"error_code", code}, {"message", message}}.dump() << '\n';
    } else {
        std::cerr << "advqa: " << code << ": " << message << '\n';
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial question authoring toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    bool as_json = false;
    std::string config;
    auto common = [&](CLI::App* sub, std::uint64_t& seed, std::string& out) {
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out, "output path");
        sub->add_flag("--json", as_json, "machine-readable output and errors");
        sub->add_option("--config", config, "JSON config; its values override flags");
    };

    SynthOpts synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic trigger-word corpus");
    common(s, synth.seed, synth.out);
    s->add_option("--answers", synth.answers);
    s->add_option("--per-answer", synth.per_answer);
    s->add_option("--filler-vocab", synth.filler_vocab);
    s->add_option("--min-words", synth.min_words);
    s->add_option("--max-words", synth.max_words);
    s->add_option("--test-fraction", synth.test_fraction);
    s->add_option("--emb-out", synth.emb_out, "also write matching random embeddings");
    s->add_option("--emb-dim", synth.emb_dim);
    s->add_option("--filler-scale", synth.filler_scale, "std-dev of filler embeddings");

    IndexOpts index;
    auto* ix = app.add_subcommand("index", "build a BM25 index over the training split");
    common(ix, index.seed, index.out);
    ix->add_option("--data", index.data);
    ix->add_option("--format", index.format, "json or binary");
    ix->add_option("--k1", index.k1);
    ix->add_option("--b", index.b);
    ix->add_flag("--stem", index.stem);
    ix->add_flag("--stopwords", index.stopwords, "drop English stopwords");

    TrainOpts trn;
    auto* t = app.add_subcommand("train", "train a neural guesser");
    common(t, trn.seed, trn.out);
    t->add_option("--data", trn.data);
    t->add_option("--emb", trn.emb, "embedding text file");
    t->add_option("--arch", trn.arch, "dan, gru or linear");
    t->add_option("--epochs", trn.epochs);
    t->add_option("--batch", trn.batch);
    t->add_option("--lr", trn.lr);
    t->add_option("--hidden", trn.hidden);
    t->add_option("--dropout-keep", trn.dropout_keep);
    t->add_flag("--bidirectional", trn.bidirectional);

    EvalOpts ev;
    auto* e = app.add_subcommand("eval", "accuracy curves and transfer table");
    common(e, ev.seed, ev.out);
    e->add_option("--model", ev.models, "ID=PATH[,EMBEDDINGS]");
    e->add_option("--set", ev.sets, "NAME=PATH");
    e->add_option("--split", ev.split, "all, train or test");
    e->add_option("--grid-steps", ev.grid_steps);
    e->add_option("--granularity", ev.granularity, "word or sentence");

    AnalyzeOpts an;
    auto* a = app.add_subcommand("analyze", "n-gram and entity overlap report");
    common(a, an.seed, an.out);
    a->add_option("--test", an.test);
    a->add_option("--train", an.train);
    a->add_option("--split", an.split, "which questions of --test to analyze");

    ValidateOpts va;
    auto* v = app.add_subcommand("validate", "check submissions against the acceptance rules");
    common(v, va.seed, va.out);
    v->add_option("--data", va.data);
    v->add_option("--train", va.train);
    v->add_option("--blocklist", va.blocklist);
    v->add_option("--min-tokens", va.min_tokens);
    v->add_option("--max-tokens", va.max_tokens);
    v->add_option("--dup-threshold", va.dup_threshold);

    ServeOpts sv;
    auto* srv = app.add_subcommand("serve", "run the authoring HTTP API");
    common(srv, sv.seed, sv.out);
    srv->add_option("--model", sv.models, "ID=PATH[,EMBEDDINGS]");
    srv->add_option("--train", sv.train);
    srv->add_option("--data-dir", sv.data_dir);
    srv->add_option("--host", sv.host);
    srv->add_option("--port", sv.port, "0 picks a free port");
    srv->add_option("--granularity", sv.granularity);
    srv->add_option("--evidence", sv.evidence, "top or answer");
    srv->add_option("--guesses", sv.guesses);
    srv->add_option("--blocklist", sv.blocklist);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        for (int i = 1; i < argc; ++i) {
            if (std::string(argv[i]) == "--json") {
                as_json = true;
            }
        }
        return fail(as_json, "bad_arguments", ex.what());
    }

    try {
        if (s->parsed()) {
            cmd_synth(resolve("synth", synth, config), as_json);
        } else if (ix->parsed()) {
            cmd_index(resolve("index", index, config), as_json);
        } else if (t->parsed()) {
            cmd_train(resolve("train", trn, config), as_json);
        } else if (e->parsed()) {
            cmd_eval(resolve("eval", ev, config), as_json);
        } else if (a->parsed()) {
            cmd_analyze(resolve("analyze", an, config), as_json);
        } else if (v->parsed()) {
            cmd_validate(resolve("validate", va, config), as_json);
        } else if (srv->parsed()) {
            cmd_serve(resolve("serve", sv, config), as_json);
        }
    } catch (const advqa::Error& ex) {
        return fail(as_json, ex.code(), ex.what());
    } catch (const std::exception& ex) {
        return fail(as_json, "internal", ex.what());
    }
    return 0;
}
