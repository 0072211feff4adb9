#include "advqa/authoring.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "advqa/error.hpp"

namespace advqa {
namespace {

using nlohmann::json;

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<double>();
}

json feedback_json(const DraftFeedback& f) {
    json guesses = json::array();
    for (const auto& g : f.guesses) {
        guesses.push_back({{"answer", g.answer.canonical_name}, {"class_index", g.answer.class_index}, {"score", g.score}});
    }
    return {{"tokens", f.tokens},
            {"guesses", std::move(guesses)},
            {"granularity", std::string(to_string(f.granularity))},
            {"buzz",
             {{"first", optional_number(f.buzz.first_correct_fraction)},
              {"stable", optional_number(f.buzz.stable_correct_fraction)},
              {"per_prefix_top1", f.buzz.per_prefix_top1},
              {"prefix_lengths", f.buzz.prefix_lengths}}},
            {"evidence",
             {{"weights", f.evidence.weights},
              {"normalization", f.evidence.normalization == EvidenceNormalization::Raw ? "raw" : "max_abs_one"},
              {"class_index", f.evidence_class}}},
            {"top1_correct", f.top1_correct}};
}

DraftFeedback feedback_from(const json& j) {
    DraftFeedback f;
    f.tokens = j.at("tokens").get<TokenSequence>();
    for (const auto& g : j.at("guesses")) {
        f.guesses.push_back({{g.at("answer").get<std::string>(), g.at("class_index").get<std::size_t>()},
                             g.at("score").get<double>()});
    }
    f.granularity = parse_granularity(j.at("granularity").get<std::string>()).value_or(Granularity::Sentence);
    const auto& b = j.at("buzz");
    f.buzz.first_correct_fraction = read_optional(b.at("first"));
    f.buzz.stable_correct_fraction = read_optional(b.at("stable"));
    f.buzz.per_prefix_top1 = b.at("per_prefix_top1").get<std::vector<std::size_t>>();
    f.buzz.prefix_lengths = b.at("prefix_lengths").get<std::vector<std::size_t>>();
    const auto& e = j.at("evidence");
    f.evidence.weights = e.at("weights").get<std::vector<double>>();
    f.evidence.normalization =
        e.at("normalization").get<std::string>() == "raw" ? EvidenceNormalization::Raw : EvidenceNormalization::MaxAbsOne;
    f.evidence_class = e.at("class_index").get<std::size_t>();
    f.top1_correct = j.at("top1_correct").get<bool>();
    return f;
}

json verdict_json(const ValidationVerdict& v) {
    json j = {{"verdict", v.accepted() ? "Accept" : "Reject"}};
    if (v.reason) {
        j["reason"] = std::string(to_string(*v.reason));
    }
    if (!v.matched_id.empty()) {
        j["matched_id"] = v.matched_id;
    }
    return j;
}

ValidationVerdict verdict_from(const json& j) {
    ValidationVerdict v;
    if (j.at("verdict") == "Reject") {
        const auto reason = j.at("reason").get<std::string>();
        for (auto r : {RejectReason::TooShort, RejectReason::TooLong, RejectReason::Vulgar,
                       RejectReason::DuplicateOfTraining, RejectReason::DuplicateOfSubmission}) {
            if (to_string(r) == reason) {
                v.reason = r;
            }
        }
        if (!v.reason) {
            throw Error("corrupt_log", "unknown reject reason " + reason);
        }
    }
    v.matched_id = j.value("matched_id", std::string{});
    return v;
}

std::string fold_name(std::string_view s) {
    std::string out;
    for (char c : s) {
        out.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

} // namespace

std::string_view to_string(SessionState s) {
    switch (s) {
    case SessionState::Open: return "Open";
    case SessionState::Submitted: return "Submitted";
    case SessionState::Abandoned: return "Abandoned";
    }
    return "?";
}

std::string feedback_to_json(const DraftFeedback& f) { return feedback_json(f).dump(); }

DraftFeedback feedback_from_json(const std::string& text) { return feedback_from(json::parse(text)); }

AuthoringService::AuthoringService(std::vector<std::shared_ptr<const QAModel>> models,
                                   std::shared_ptr<const Dataset> train, ServiceConfig config)
    : train_(std::move(train)), config_(std::move(config)) {
    if (!train_) {
        throw Error("invalid_argument", "authoring service needs training data for validation");
    }
    for (auto& m : models) {
        if (!m) {
            throw Error("invalid_argument", "null model");
        }
        const auto id = m->id();
        if (!models_.emplace(id, std::move(m)).second) {
            throw Error("duplicate_model", "model id \"" + id + "\" registered twice");
        }
    }
    if (!config_.data_dir.empty()) {
        std::filesystem::create_directories(config_.data_dir / "sessions");
        load();
    }
}

AuthoringService::~AuthoringService() = default;

std::int64_t AuthoringService::now() const {
    if (config_.clock) {
        return config_.clock();
    }
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string AuthoringService::next_session_id() {
    static thread_local std::mt19937 salt(std::random_device{}());
    std::ostringstream id;
    id << "s" << std::setw(6) << std::setfill('0') << next_id_++ << '-' << std::hex << std::setw(8) << salt();
    return id.str();
}

const QAModel& AuthoringService::model(const std::string& model_id) const {
    auto it = models_.find(model_id);
    if (it == models_.end()) {
        throw Error("unknown_model", "no model with id \"" + model_id + "\"");
    }
    return *it->second;
}

std::vector<ModelInfo> AuthoringService::models() const {
    std::vector<ModelInfo> out;
    for (const auto& [id, m] : models_) {
        out.push_back({id, m->family(), m->labels().size()});
    }
    return out;
}

std::vector<AnswerLabel> AuthoringService::answers(std::string_view prefix, const std::string& model_id,
                                                   std::size_t limit) const {
    const auto key = fold_name(prefix);
    std::vector<AnswerLabel> out;
    std::set<std::string> seen;
    const auto scan = [&](const QAModel& m) {
        for (const auto& l : m.labels()) {
            if (fold_name(l.canonical_name).compare(0, key.size(), key) == 0 && seen.insert(l.canonical_name).second) {
                out.push_back(l);
            }
        }
    };
    if (!model_id.empty()) {
        scan(model(model_id));
    } else {
        for (const auto& [id, m] : models_) {
            scan(*m);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const AnswerLabel& a, const AnswerLabel& b) { return a.canonical_name < b.canonical_name; });
    if (out.size() > limit) {
        out.resize(limit);
    }
    return out;
}

std::vector<Question> AuthoringService::submissions() const {
    std::lock_guard lock(submissions_mutex_);
    return submissions_;
}

std::shared_ptr<AuthoringService::Slot> AuthoringService::slot(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        throw Error("unknown_session", "no session with id \"" + session_id + "\"");
    }
    return it->second;
}

std::filesystem::path AuthoringService::session_log(const std::string& session_id) const {
    return config_.data_dir / "sessions" / (session_id + ".jsonl");
}

void AuthoringService::append_record(const std::string& session_id, const std::string& line) const {
    if (config_.data_dir.empty()) {
        return;
    }
    std::ofstream out(session_log(session_id), std::ios::binary | std::ios::app);
    const std::string record = line + '\n';
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
    out.flush();
    if (!out) {
        throw Error("io_error", "cannot append to log of session " + session_id);
    }
}

void AuthoringService::write_index() const {
    if (config_.data_dir.empty()) {
        return;
    }
    json sessions = json::array();
    {
        std::shared_lock lock(sessions_mutex_);
        for (const auto& [id, s] : sessions_) {
            std::lock_guard slot_lock(s->mutex);
            const auto& e = s->session;
            sessions.push_back({{"session_id", e.session_id},
                                {"author_id", e.author_id},
                                {"model_id", e.target_model},
                                {"answer", e.chosen_answer.canonical_name},
                                {"state", std::string(to_string(e.state))},
                                {"events", e.events.size()}});
        }
    }
    std::lock_guard lock(index_mutex_);
    const auto tmp = config_.data_dir / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"version", 1}, {"sessions", std::move(sessions)}}.dump(2) << '\n';
        if (!out) {
            throw Error("io_error", "cannot write session index");
        }
    }
    std::filesystem::rename(tmp, config_.data_dir / "index.json");
}

EditSession AuthoringService::create_session(const std::string& author_id, const std::string& model_id,
                                             const std::string& answer, Category category) {
    const auto& m = model(model_id);
    const auto cls = find_class(m, answer);
    if (cls == kNone) {
        throw Error("unknown_answer", "answer \"" + answer + "\" is not in the vocabulary of model \"" + model_id + "\"");
    }
    auto s = std::make_shared<Slot>();
    {
        std::unique_lock lock(sessions_mutex_);
        s->session.session_id = next_session_id();
        s->session.author_id = author_id;
        s->session.target_model = model_id;
        s->session.chosen_answer = m.labels()[cls];
        s->session.category = category;
        s->session.created_ms = now();
        sessions_.emplace(s->session.session_id, s);
    }
    EditSession copy;
    {
        std::lock_guard slot_lock(s->mutex);
        const auto& e = s->session;
        append_record(e.session_id, json{{"type", "session"},
                                         {"session_id", e.session_id},
                                         {"author_id", e.author_id},
                                         {"model_id", e.target_model},
                                         {"answer", e.chosen_answer.canonical_name},
                                         {"category", std::string(to_string(e.category))},
                                         {"created_ms", e.created_ms}}
                                        .dump());
        copy = e;
    }
    write_index();
    return copy;
}

DraftFeedback AuthoringService::compute_feedback(const QAModel& m, const AnswerLabel& answer,
                                                 const std::string& draft_text, Granularity granularity) const {
    Question q = make_question("draft", draft_text, answer.canonical_name);
    if (q.tokens.empty()) {
        throw Error("empty_draft", "draft has no tokens");
    }
    DraftFeedback f;
    f.tokens = q.tokens;
    f.granularity = granularity;
    f.guesses = m.guess(q.tokens, config_.guesses_shown);
    f.top1_correct = !f.guesses.empty() && f.guesses.front().answer.canonical_name == answer.canonical_name;
    f.buzz = buzz(m, q, granularity);
    std::size_t target = kNone;
    if (config_.evidence_target == EvidenceTarget::ChosenAnswer) {
        target = find_class(m, answer.canonical_name);
    } else if (!f.guesses.empty()) {
        target = f.guesses.front().answer.class_index;
    }
    if (target == kNone) {
        f.evidence.weights.assign(q.tokens.size(), 0.0);
        f.evidence_class = kNone;
    } else {
        f.evidence = m.evidence(q.tokens, target);
        f.evidence_class = target;
    }
    return f;
}

EditEvent AuthoringService::evaluate_draft(const std::string& session_id, const std::string& draft_text,
                                           std::optional<Granularity> granularity) {
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    auto& session = s->session;
    if (session.state != SessionState::Open) {
        throw Error("session_closed", "session " + session_id + " is " + std::string(to_string(session.state)));
    }
    EditEvent ev;
    ev.feedback = compute_feedback(model(session.target_model), session.chosen_answer, draft_text,
                                   granularity.value_or(config_.default_granularity));
    ev.seq = session.events.size() + 1;
    ev.timestamp_ms = now();
    ev.draft_text = draft_text;
    append_record(session_id, json{{"type", "event"},
                                   {"seq", ev.seq},
                                   {"timestamp_ms", ev.timestamp_ms},
                                   {"draft", ev.draft_text},
                                   {"feedback", feedback_json(ev.feedback)}}
                                  .dump());
    session.events.push_back(ev);
    return ev;
}

ValidationVerdict AuthoringService::submit(const std::string& session_id) {
    auto s = slot(session_id);
    ValidationVerdict verdict;
    {
        std::lock_guard lock(s->mutex);
        auto& session = s->session;
        if (session.state != SessionState::Open) {
            throw Error("session_closed", "session " + session_id + " is " + std::string(to_string(session.state)));
        }
        if (session.events.empty()) {
            throw Error("no_events", "session " + session_id + " has no drafts to submit");
        }
        const auto& m = model(session.target_model);
        Question q = make_question(session.session_id, session.events.back().draft_text,
                                   session.chosen_answer.canonical_name, session.category,
                                   m.family() == ModelFamily::Neural ? Source::AdversarialRNN : Source::AdversarialIR);
        {
            // Submissions are serialized globally so concurrent sessions see
            // each other's accepted questions.
            std::lock_guard sub_lock(submissions_mutex_);
            verdict = validate_submission(q, *train_, config_.policy, submissions_);
            if (verdict.accepted()) {
                if (!config_.data_dir.empty()) {
                    std::ofstream out(config_.data_dir / "submissions.jsonl", std::ios::binary | std::ios::app);
                    const auto line = question_to_jsonl(q) + '\n';
                    out.write(line.data(), static_cast<std::streamsize>(line.size()));
                    out.flush();
                    if (!out) {
                        throw Error("io_error", "cannot persist submission");
                    }
                }
                submissions_.push_back(q);
            }
        }
        json record = verdict_json(verdict);
        record["type"] = "verdict";
        append_record(session_id, record.dump());
        session.last_verdict = verdict;
        if (verdict.accepted()) {
            append_record(session_id, json{{"type", "state"}, {"state", "Submitted"}}.dump());
            session.state = SessionState::Submitted;
        }
    }
    if (verdict.accepted()) {
        write_index();
    }
    return verdict;
}

void AuthoringService::abandon(const std::string& session_id) {
    auto s = slot(session_id);
    {
        std::lock_guard lock(s->mutex);
        if (s->session.state != SessionState::Open) {
            throw Error("session_closed", "session " + session_id + " is " + std::string(to_string(s->session.state)));
        }
        append_record(session_id, json{{"type", "state"}, {"state", "Abandoned"}}.dump());
        s->session.state = SessionState::Abandoned;
    }
    write_index();
}

BuzzTrajectory AuthoringService::trajectory(const std::string& session_id) const {
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    BuzzTrajectory out;
    for (const auto& ev : s->session.events) {
        out.push_back({ev.seq, ev.feedback.tokens.size(), ev.feedback.buzz.first_correct_fraction});
    }
    return out;
}

EditSession AuthoringService::session(const std::string& session_id) const {
    auto s = slot(session_id);
    std::lock_guard lock(s->mutex);
    return s->session;
}

std::vector<std::string> AuthoringService::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) {
        out.push_back(id);
    }
    return out;
}

void AuthoringService::load() {
    const auto subs = config_.data_dir / "submissions.jsonl";
    if (std::filesystem::exists(subs)) {
        submissions_ = load_dataset(subs).questions();
    }
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(config_.data_dir / "sessions")) {
        if (entry.path().extension() == ".jsonl") {
            logs.push_back(entry.path());
        }
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
        std::ifstream in(path, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto s = std::make_shared<Slot>();
        auto& session = s->session;
        std::size_t pos = 0;
        std::size_t lineno = 0;
        while (pos < content.size()) {
            const auto nl = content.find('\n', pos);
            if (nl == std::string::npos) {
                break;  // torn final append: the record never completed
            }
            const auto line = content.substr(pos, nl - pos);
            pos = nl + 1;
            ++lineno;
            json r;
            try {
                r = json::parse(line);
                const auto type = r.at("type").get<std::string>();
                if (type == "session") {
                    session.session_id = r.at("session_id").get<std::string>();
                    session.author_id = r.at("author_id").get<std::string>();
                    session.target_model = r.at("model_id").get<std::string>();
                    session.chosen_answer.canonical_name = r.at("answer").get<std::string>();
                    session.category = parse_category(r.value("category", "Other")).value_or(Category::Other);
                    session.created_ms = r.at("created_ms").get<std::int64_t>();
                } else if (type == "event") {
                    EditEvent ev;
                    ev.seq = r.at("seq").get<std::uint64_t>();
                    ev.timestamp_ms = r.at("timestamp_ms").get<std::int64_t>();
                    ev.draft_text = r.at("draft").get<std::string>();
                    ev.feedback = feedback_from(r.at("feedback"));
                    if (ev.seq != session.events.size() + 1) {
                        throw Error("corrupt_log", "non-contiguous sequence number");
                    }
                    session.events.push_back(std::move(ev));
                } else if (type == "verdict") {
                    session.last_verdict = verdict_from(r);
                } else if (type == "state") {
                    const auto st = r.at("state").get<std::string>();
                    session.state = st == "Submitted" ? SessionState::Submitted : SessionState::Abandoned;
                }
            } catch (const json::exception& e) {
                throw Error("corrupt_log", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (pos < content.size()) {
            // drop the torn tail so the next append starts on a fresh line
            std::filesystem::resize_file(path, pos);
        }
        if (session.session_id.empty()) {
            continue;
        }
        if (auto it = models_.find(session.target_model); it != models_.end()) {
            const auto cls = find_class(*it->second, session.chosen_answer.canonical_name);
            if (cls != kNone) {
                session.chosen_answer.class_index = cls;
            }
        }
        // Ids look like sNNNNNN-xxxxxxxx; keep new ids past the largest seen.
        if (session.session_id.size() > 7 && session.session_id[0] == 's') {
            try {
                next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(session.session_id.substr(1, 6)) + 1);
            } catch (const std::exception&) {
            }
        }
        sessions_.emplace(session.session_id, std::move(s));
    }
    write_index();
}

} // namespace advqa
