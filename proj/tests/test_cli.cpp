#include <doctest.h>

#include <csignal>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "advqa/analysis.hpp"
#include "advqa/buzzer.hpp"
#include "support.hpp"

using namespace advqa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') q += "'\\''";
        else q += c;
    }
    return q + "'";
}

Run advqa_cli(const test::TempDir& dir, const std::vector<std::string>& args) {
    std::string cmd = quote(ADVQA_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = test::read_file(out);
    r.err = test::read_file(err);
    return r;
}

std::string p(const test::TempDir& d, const std::string& name) { return (d / name).string(); }

// Last non-empty line of stderr (the first is the resolved-config log).
std::string last_line(const std::string& s) {
    std::istringstream in(s);
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    return last;
}

}  // namespace

TEST_CASE("synth is deterministic and validates its arguments") {
    test::TempDir d("cli-synth");
    REQUIRE(advqa_cli(d, {"synth", "--seed", "3", "--out", p(d, "a.jsonl"), "--emb-out", p(d, "a.emb")}).status == 0);
    REQUIRE(advqa_cli(d, {"synth", "--seed", "3", "--out", p(d, "b.jsonl"), "--emb-out", p(d, "b.emb")}).status == 0);
    CHECK(test::read_file(d / "a.jsonl") == test::read_file(d / "b.jsonl"));
    CHECK(test::read_file(d / "a.emb") == test::read_file(d / "b.emb"));
    REQUIRE(advqa_cli(d, {"synth", "--seed", "4", "--out", p(d, "c.jsonl")}).status == 0);
    CHECK(test::read_file(d / "a.jsonl") != test::read_file(d / "c.jsonl"));

    const auto data = load_dataset(d / "a.jsonl");
    CHECK(data.size() == 200);
    CHECK(data.answer_vocab().size() == 10);

    const auto bad = advqa_cli(d, {"synth", "--per-answer", "0", "--out", p(d, "z.jsonl"), "--json"});
    CHECK(bad.status != 0);
    CHECK(json::parse(last_line(bad.err))["error_code"] == "invalid_argument");
}

TEST_CASE("errors name the offending input and follow the chosen format") {
    test::TempDir d("cli-errors");
    const auto missing = p(d, "does-not-exist.jsonl");
    const auto plain = advqa_cli(d, {"index", "--data", missing, "--out", p(d, "ix.json")});
    CHECK(plain.status == 1);
    CHECK(last_line(plain.err).rfind("advqa: io_error: ", 0) == 0);
    CHECK(plain.err.find(missing) != std::string::npos);

    const auto js = advqa_cli(d, {"index", "--data", missing, "--out", p(d, "ix.json"), "--json"});
    CHECK(js.status == 1);
    const auto e = json::parse(last_line(js.err));
    CHECK(e["error_code"] == "io_error");
    CHECK(e["message"].get<std::string>().find(missing) != std::string::npos);

    CHECK(advqa_cli(d, {"index", "--bogus-flag"}).status == 1);
    CHECK(advqa_cli(d, {}).status == 1);
}

TEST_CASE("index, train and eval agree with independent computations") {
    test::TempDir d("cli-pipeline");
    REQUIRE(advqa_cli(d, {"synth", "--seed", "7", "--answers", "5", "--per-answer", "12", "--out", p(d, "data.jsonl"),
                          "--emb-out", p(d, "emb.txt"), "--emb-dim", "16"})
                .status == 0);
    const auto ix = advqa_cli(d, {"index", "--data", p(d, "data.jsonl"), "--out", p(d, "ix.bin"), "--format", "binary",
                                  "--json"});
    REQUIRE(ix.status == 0);
    CHECK(json::parse(ix.out)["num_docs"] == 5);

    const auto tr = advqa_cli(d, {"train", "--data", p(d, "data.jsonl"), "--emb", p(d, "emb.txt"), "--out",
                                  p(d, "dan.clf"), "--epochs", "3", "--json"});
    REQUIRE(tr.status == 0);
    CHECK(json::parse(tr.out)["epoch_loss"].size() == 3);
    // the saved artifact loads and round-trips
    const auto clf = Classifier::load(d / "dan.clf");
    clf.save(d / "again.clf");
    CHECK(test::read_file(d / "dan.clf") == test::read_file(d / "again.clf"));

    REQUIRE(advqa_cli(d, {"eval", "--model", "ir=" + p(d, "ix.bin"), "--model",
                          "dan=" + p(d, "dan.clf") + "," + p(d, "emb.txt"), "--set", "s=" + p(d, "data.jsonl"), "--split",
                          "test", "--out", p(d, "eval"), "--grid-steps", "4"})
                .status == 0);
    for (const char* f : {"curves.csv", "curves.json", "transfer.csv", "transfer.json"}) CHECK(fs::exists(d / "eval" / f));

    // IR column of the transfer table against a brute-force BM25 ranking
    const auto data = load_dataset(d / "data.jsonl");
    const test::BruteBm25 oracle(data);
    std::size_t right = 0;
    const auto test_qs = data.test_questions();
    for (const auto& q : test_qs) right += oracle.ranking(q.tokens, 1).front().first == q.answer.class_index;
    const auto transfer = json::parse(test::read_file(d / "eval" / "transfer.json"));
    CHECK(transfer["accuracy"][0][0].get<double>() ==
          doctest::Approx(static_cast<double>(right) / static_cast<double>(test_qs.size())).epsilon(1e-12));

    const auto empty = advqa_cli(d, {"eval", "--model", "ir=" + p(d, "ix.bin"), "--set", "s=" + p(d, "data.jsonl"),
                                     "--split", "nothing", "--out", p(d, "eval2")});
    CHECK(empty.status == 1);
}

TEST_CASE("eval on an empty selection fails") {
    test::TempDir d("cli-empty");
    {
        std::ofstream f(d / "train_only.jsonl");
        f << R"({"id":"a","text":"alpha beta","answer":"A","split":"train"})" << '\n';
    }
    REQUIRE(advqa_cli(d, {"index", "--data", p(d, "train_only.jsonl"), "--out", p(d, "ix.json")}).status == 0);
    const auto r = advqa_cli(d, {"eval", "--model", "ir=" + p(d, "ix.json"), "--set", "s=" + p(d, "train_only.jsonl"),
                                 "--split", "test", "--out", p(d, "ev"), "--json"});
    CHECK(r.status == 1);
    CHECK(json::parse(last_line(r.err))["error_code"] == "empty_set");
}

TEST_CASE("analyze") {
    test::TempDir d("cli-analyze");
    const auto hand = test::data_path("hand20.jsonl").string();
    const auto r = advqa_cli(d, {"analyze", "--test", hand, "--train", hand, "--split", "train", "--out", p(d, "rep"),
                                 "--json"});
    REQUIRE(r.status == 0);
    CHECK(json::parse(r.out)["unigram_overlap"] == 1.0);
    const auto rep = json::parse(test::read_file(d / "rep.json"));
    CHECK(rep["unigram_overlap"] == 1.0);
    CHECK(fs::exists(d / "rep.csv"));

    // matches the library on the test split
    REQUIRE(advqa_cli(d, {"analyze", "--test", hand, "--train", hand, "--split", "test", "--out", p(d, "t")}).status == 0);
    const auto data = load_dataset(hand);
    const auto lib = overlap_report(data.test_questions(), data);
    CHECK(json::parse(test::read_file(d / "t.json"))["bigram_overlap"].get<double>() == lib.bigram_overlap);

    {
        std::ofstream f(d / "empty.jsonl");
    }
    const auto e = advqa_cli(d, {"analyze", "--test", p(d, "empty.jsonl"), "--train", hand, "--out", p(d, "x"), "--json"});
    CHECK(e.status == 1);
    CHECK(json::parse(last_line(e.err))["error_code"] == "empty_set");
}

TEST_CASE("validate writes one verdict per submission") {
    test::TempDir d("cli-validate");
    {
        std::ofstream f(d / "subs.jsonl");
        f << R"({"id":"s1","text":"This river flows north through Khartoum and Cairo. The Aswan High Dam sits on this river.","answer":"Nile"})"
          << '\n'
          << R"({"id":"s2","text":"Too short","answer":"Nile"})" << '\n'
          << R"({"id":"s3","text":"An entirely fresh question about distant glaciers and wandering comets over quiet mountains","answer":"Nile"})"
          << '\n'
          << R"({"id":"s4","text":"An entirely fresh question about distant glaciers and wandering comets over quiet mountains","answer":"Nile"})"
          << '\n';
    }
    REQUIRE(advqa_cli(d, {"validate", "--data", p(d, "subs.jsonl"), "--train", test::data_path("hand20.jsonl").string(),
                          "--out", p(d, "v.jsonl")})
                .status == 0);
    std::istringstream in(test::read_file(d / "v.jsonl"));
    std::vector<json> rows;
    for (std::string line; std::getline(in, line);) rows.push_back(json::parse(line));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0]["reason"] == "DuplicateOfTraining");
    CHECK(rows[0]["matched_id"] == "tr05");
    CHECK(rows[1]["reason"] == "TooShort");
    CHECK(rows[2]["accepted"] == true);
    CHECK(rows[3]["reason"] == "DuplicateOfSubmission");
    CHECK(rows[3]["matched_id"] == "s3");
}

TEST_CASE("config file values override flags") {
    test::TempDir d("cli-config");
    {
        std::ofstream f(d / "cfg.json");
        f << json{{"command", "synth"}, {"answers", 3}, {"per_answer", 4}}.dump();
    }
    const auto r = advqa_cli(d, {"synth", "--answers", "9", "--out", p(d, "x.jsonl"), "--config", p(d, "cfg.json")});
    REQUIRE(r.status == 0);
    const auto data = load_dataset(d / "x.jsonl");
    CHECK(data.answer_vocab().size() == 3);
    CHECK(data.size() == 12);
    // the resolved configuration is logged
    const auto logged = json::parse(r.err.substr(0, r.err.find('\n')));
    CHECK(logged["answers"] == 3);
    CHECK(logged["command"] == "synth");

    {
        std::ofstream f(d / "wrong.json");
        f << json{{"command", "index"}}.dump();
    }
    CHECK(advqa_cli(d, {"synth", "--out", p(d, "y.jsonl"), "--config", p(d, "wrong.json")}).status == 1);
    {
        std::ofstream f(d / "typo.json");
        f << json{{"answerz", 3}}.dump();
    }
    const auto typo = advqa_cli(d, {"synth", "--out", p(d, "y.jsonl"), "--config", p(d, "typo.json"), "--json"});
    CHECK(typo.status == 1);
    CHECK(json::parse(last_line(typo.err))["error_code"] == "bad_config");
}

TEST_CASE("serve answers requests and flushes sessions on SIGTERM") {
    test::TempDir d("cli-serve");
    const auto hand = test::data_path("hand20.jsonl").string();
    REQUIRE(advqa_cli(d, {"index", "--data", hand, "--out", p(d, "ix.json")}).status == 0);

    int out_pipe[2];
    REQUIRE(pipe(out_pipe) == 0);
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        const std::string model = "ir=" + p(d, "ix.json"), dir = p(d, "state");
        execl(ADVQA_CLI, ADVQA_CLI, "serve", "--model", model.c_str(), "--train", hand.c_str(), "--data-dir", dir.c_str(),
              "--port", "0", "--json", static_cast<char*>(nullptr));
        _exit(127);
    }
    close(out_pipe[1]);
    std::string line;
    char c;
    while (read(out_pipe[0], &c, 1) == 1 && c != '\n') line += c;
    REQUIRE_FALSE(line.empty());
    const int port = json::parse(line)["port"].get<int>();
    CHECK(port > 0);

    httplib::Client cli("127.0.0.1", port);
    const auto models = cli.Get("/api/models");
    REQUIRE(models);
    CHECK(json::parse(models->body)["models"][0]["id"] == "ir");
    const auto created =
        cli.Post("/api/sessions", R"({"author_id":"x","model_id":"ir","answer":"Tosca"})", "application/json");
    REQUIRE(created);
    const auto id = json::parse(created->body)["session_id"].get<std::string>();
    cli.Post("/api/sessions/" + id + "/draft", R"({"text":"Scarpia is stabbed"})", "application/json");

    // a second server on the same port fails cleanly
    const auto clash = advqa_cli(d, {"serve", "--model", "ir=" + p(d, "ix.json"), "--train", hand, "--port",
                                     std::to_string(port), "--json"});
    CHECK(clash.status == 1);
    CHECK(json::parse(last_line(clash.err))["error_code"] == "bind_failed");

    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    close(out_pipe[0]);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);

    const auto log = test::read_file(d / "state" / "sessions" / (id + ".jsonl"));
    CHECK(log.find("Scarpia is stabbed") != std::string::npos);
    CHECK(log.back() == '\n');
}
