#include "advqa/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "advqa/error.hpp"

namespace advqa {
namespace {

using nlohmann::json;

constexpr std::array kCategoryNames{
    std::pair{Category::Science, std::string_view{"Science"}},
    std::pair{Category::History, std::string_view{"History"}},
    std::pair{Category::Literature, std::string_view{"Literature"}},
    std::pair{Category::FineArts, std::string_view{"FineArts"}},
    std::pair{Category::ReligionMythPhilSocSci, std::string_view{"ReligionMythPhilSocSci"}},
    std::pair{Category::CurrentEventsGeoGeneral, std::string_view{"CurrentEventsGeoGeneral"}},
    std::pair{Category::Other, std::string_view{"Other"}},
};

constexpr std::array kSourceNames{
    std::pair{Source::Training, std::string_view{"Training"}},
    std::pair{Source::RegularTest, std::string_view{"RegularTest"}},
    std::pair{Source::AdversarialIR, std::string_view{"AdversarialIR"}},
    std::pair{Source::AdversarialRNN, std::string_view{"AdversarialRNN"}},
};

constexpr std::array kPhenomenonNames{
    std::pair{PhenomenonTag::ComposingSeenClues, std::string_view{"ComposingSeenClues"}},
    std::pair{PhenomenonTag::LogicCalculations, std::string_view{"LogicCalculations"}},
    std::pair{PhenomenonTag::MultiStepReasoning, std::string_view{"MultiStepReasoning"}},
    std::pair{PhenomenonTag::Paraphrase, std::string_view{"Paraphrase"}},
    std::pair{PhenomenonTag::EntityTypeDistractor, std::string_view{"EntityTypeDistractor"}},
    std::pair{PhenomenonTag::NovelClues, std::string_view{"NovelClues"}},
};

std::string fold(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' || c == '_' || c == '-' || c == '/') {
            continue;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::array<std::pair<Enum, std::string_view>, N>& names,
                               std::string_view s) {
    const auto key = fold(s);
    for (const auto& [value, name] : names) {
        if (fold(name) == key) {
            return value;
        }
    }
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view enum_name(const std::array<std::pair<Enum, std::string_view>, N>& names, Enum e) {
    for (const auto& [value, name] : names) {
        if (value == e) {
            return name;
        }
    }
    return "?";
}

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
    throw Error("malformed_record", "line " + std::to_string(line) + ": " + what);
}

std::string required_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        malformed(line, std::string("missing or non-string \"") + key + "\"");
    }
    return it->get<std::string>();
}

} // namespace

std::string_view to_string(Category c) { return enum_name(kCategoryNames, c); }
std::string_view to_string(Source s) { return enum_name(kSourceNames, s); }
std::string_view to_string(PhenomenonTag t) { return enum_name(kPhenomenonNames, t); }
std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::optional<Category> parse_category(std::string_view s) { return parse_enum(kCategoryNames, s); }
std::optional<Source> parse_source(std::string_view s) { return parse_enum(kSourceNames, s); }
std::optional<PhenomenonTag> parse_phenomenon(std::string_view s) {
    return parse_enum(kPhenomenonNames, s);
}

std::string_view to_string(RejectReason r) {
    switch (r) {
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooLong: return "TooLong";
    case RejectReason::Vulgar: return "Vulgar";
    case RejectReason::DuplicateOfTraining: return "DuplicateOfTraining";
    case RejectReason::DuplicateOfSubmission: return "DuplicateOfSubmission";
    }
    return "?";
}

Question make_question(std::string id, std::string raw_text, std::string answer, Category category,
                       Source source) {
    Question q;
    q.id = std::move(id);
    q.tokens = tokenize(raw_text);
    q.raw_text = std::move(raw_text);
    q.answer.canonical_name = std::move(answer);
    q.category = category;
    q.source = source;
    return q;
}

Dataset::Dataset(std::vector<Question> questions, std::map<std::string, Split> split)
    : questions_(std::move(questions)) {
    std::set<std::string> names;
    std::unordered_set<std::string> ids;
    for (const auto& q : questions_) {
        if (!ids.insert(q.id).second) {
            throw Error("duplicate_id", "duplicate question id \"" + q.id + "\"");
        }
        if (q.tokens.empty()) {
            throw Error("empty_question", "question \"" + q.id + "\" has no tokens");
        }
        names.insert(q.answer.canonical_name);
    }
    std::map<std::string, std::size_t, std::less<>> index;
    for (const auto& name : names) {
        index.emplace(name, vocab_.size());
        vocab_.push_back({name, vocab_.size()});
    }
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        auto& q = questions_[i];
        q.answer.class_index = index.find(q.answer.canonical_name)->second;
        auto it = split.find(q.id);
        const Split s = it == split.end() ? Split::Train : it->second;
        split_[q.id] = s;
        if (s == Split::Train) {
            train_by_answer_[q.answer.canonical_name].push_back(i);
        }
    }
}

Split Dataset::split_of(const std::string& id) const {
    auto it = split_.find(id);
    return it == split_.end() ? Split::Train : it->second;
}

std::vector<Question> Dataset::train_questions() const {
    std::vector<Question> out;
    for (const auto& q : questions_) {
        if (split_of(q.id) == Split::Train) {
            out.push_back(q);
        }
    }
    return out;
}

std::vector<Question> Dataset::test_questions() const {
    std::vector<Question> out;
    for (const auto& q : questions_) {
        if (split_of(q.id) == Split::Test) {
            out.push_back(q);
        }
    }
    return out;
}

std::optional<AnswerLabel> Dataset::find_answer(std::string_view canonical_name) const {
    auto it = std::lower_bound(vocab_.begin(), vocab_.end(), canonical_name,
                               [](const AnswerLabel& l, std::string_view n) { return l.canonical_name < n; });
    if (it != vocab_.end() && it->canonical_name == canonical_name) {
        return *it;
    }
    return std::nullopt;
}

const Question* Dataset::find_question(std::string_view id) const {
    for (const auto& q : questions_) {
        if (q.id == id) {
            return &q;
        }
    }
    return nullptr;
}

std::span<const std::size_t> Dataset::train_indices_for(std::string_view canonical_name) const {
    auto it = train_by_answer_.find(canonical_name);
    if (it == train_by_answer_.end()) {
        return {};
    }
    return it->second;
}

Dataset read_dataset(std::istream& in, DatasetFormat /*format*/) {
    std::vector<Question> questions;
    std::map<std::string, Split> split;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            malformed(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            malformed(lineno, "record is not a JSON object");
        }
        Question q = make_question(required_string(obj, "id", lineno), required_string(obj, "text", lineno),
                                   required_string(obj, "answer", lineno));
        if (q.tokens.empty()) {
            throw Error("empty_question", "line " + std::to_string(lineno) + ": question \"" + q.id + "\" has no tokens");
        }
        if (q.answer.canonical_name.empty()) {
            malformed(lineno, "empty answer");
        }
        if (!ids.insert(q.id).second) {
            throw Error("duplicate_id",
                        "line " + std::to_string(lineno) + ": duplicate question id \"" + q.id + "\"");
        }
        if (auto it = obj.find("category"); it != obj.end() && !it->is_null()) {
            auto c = it->is_string() ? parse_category(it->get<std::string>()) : std::nullopt;
            if (!c) {
                malformed(lineno, "unknown category " + it->dump());
            }
            q.category = *c;
        }
        if (auto it = obj.find("source"); it != obj.end() && !it->is_null()) {
            auto s = it->is_string() ? parse_source(it->get<std::string>()) : std::nullopt;
            if (!s) {
                malformed(lineno, "unknown source " + it->dump());
            }
            q.source = *s;
        }
        if (auto it = obj.find("phenomena"); it != obj.end() && !it->is_null()) {
            if (!it->is_array()) {
                malformed(lineno, "\"phenomena\" must be an array");
            }
            for (const auto& tag : *it) {
                auto t = tag.is_string() ? parse_phenomenon(tag.get<std::string>()) : std::nullopt;
                if (!t) {
                    malformed(lineno, "unknown phenomenon " + tag.dump());
                }
                q.phenomena.insert(*t);
            }
        }
        if (auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
            const std::string s = it->is_string() ? it->get<std::string>() : std::string{};
            if (s == "train") {
                split[q.id] = Split::Train;
            } else if (s == "test") {
                split[q.id] = Split::Test;
            } else {
                malformed(lineno, "split must be \"train\" or \"test\"");
            }
        }
        questions.push_back(std::move(q));
    }
    return Dataset(std::move(questions), std::move(split));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io_error", "cannot open dataset " + path.string());
    }
    return read_dataset(in, format);
}

std::string question_to_jsonl(const Question& q, std::optional<Split> split) {
    json obj = json::object();
    obj["id"] = q.id;
    obj["text"] = q.raw_text;
    obj["answer"] = q.answer.canonical_name;
    obj["category"] = std::string(to_string(q.category));
    obj["source"] = std::string(to_string(q.source));
    json tags = json::array();
    for (auto t : q.phenomena) {
        tags.push_back(std::string(to_string(t)));
    }
    obj["phenomena"] = std::move(tags);
    if (split) {
        obj["split"] = std::string(to_string(*split));
    }
    return obj.dump();
}

void write_dataset(std::ostream& out, const Dataset& data) {
    for (const auto& q : data.questions()) {
        out << question_to_jsonl(q, data.split_of(q.id)) << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("io_error", "cannot write dataset " + path.string());
    }
    write_dataset(out, data);
    if (!out) {
        throw Error("io_error", "write failed for " + path.string());
    }
}

std::unordered_set<std::string> load_blocklist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("io_error", "cannot open blocklist " + path.string());
    }
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        for (auto& tok : tokenize(line)) {
            out.insert(std::move(tok));
        }
    }
    return out;
}

double jaccard(const TokenSequence& a, const TokenSequence& b) {
    std::set<std::string_view> sa(a.begin(), a.end());
    std::set<std::string_view> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (auto t : sa) {
        common += sb.count(t);
    }
    return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

ValidationVerdict validate_submission(const Question& q, const Dataset& train, const ValidationPolicy& policy,
                                      std::span<const Question> prior_submissions) {
    for (std::size_t idx : train.train_indices_for(q.answer.canonical_name)) {
        const auto& other = train.questions()[idx];
        if (jaccard(q.tokens, other.tokens) >= policy.dup_threshold) {
            return ValidationVerdict::reject(RejectReason::DuplicateOfTraining, other.id);
        }
    }
    for (const auto& other : prior_submissions) {
        if (other.answer.canonical_name == q.answer.canonical_name &&
            jaccard(q.tokens, other.tokens) >= policy.dup_threshold) {
            return ValidationVerdict::reject(RejectReason::DuplicateOfSubmission, other.id);
        }
    }
    if (q.tokens.size() < policy.min_tokens) {
        return ValidationVerdict::reject(RejectReason::TooShort);
    }
    if (q.tokens.size() > policy.max_tokens) {
        return ValidationVerdict::reject(RejectReason::TooLong);
    }
    for (const auto& t : q.tokens) {
        if (policy.blocklist.count(t) != 0) {
            return ValidationVerdict::reject(RejectReason::Vulgar);
        }
    }
    return ValidationVerdict::accept();
}

} // namespace advqa
