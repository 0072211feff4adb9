#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "advqa/tokenizer.hpp"

namespace advqa {

enum class Category {
    Science,
    History,
    Literature,
    FineArts,
    ReligionMythPhilSocSci,
    CurrentEventsGeoGeneral,
    Other,
};

enum class Source { Training, RegularTest, AdversarialIR, AdversarialRNN };

enum class PhenomenonTag {
    ComposingSeenClues,
    LogicCalculations,
    MultiStepReasoning,
    Paraphrase,
    EntityTypeDistractor,
    NovelClues,
};

enum class Split { Train, Test };

std::string_view to_string(Category c);
std::string_view to_string(Source s);
std::string_view to_string(PhenomenonTag t);
std::string_view to_string(Split s);

// Parsing is case-insensitive and ignores spaces, '_', '-' and '/'.
// Unknown names return nullopt.
std::optional<Category> parse_category(std::string_view s);
std::optional<Source> parse_source(std::string_view s);
std::optional<PhenomenonTag> parse_phenomenon(std::string_view s);

struct AnswerLabel {
    std::string canonical_name;
    std::size_t class_index = 0;

    friend bool operator==(const AnswerLabel&, const AnswerLabel&) = default;
};

struct Question {
    std::string id;
    std::string raw_text;
    TokenSequence tokens;
    AnswerLabel answer;
    Category category = Category::Other;
    Source source = Source::Training;
    std::set<PhenomenonTag> phenomena;

    friend bool operator==(const Question&, const Question&) = default;
};

/// Builds a question from raw text, tokenizing with the canonical tokenizer.
/// The answer's class_index is left at 0 unless the caller sets it.
Question make_question(std::string id, std::string raw_text, std::string answer,
                       Category category = Category::Other, Source source = Source::Training);

/// Questions plus the answer vocabulary and the train/test assignment.
/// Immutable after construction.
class Dataset {
public:
    Dataset() = default;

    /// Assigns class indices by ascending canonical name and rewrites every
    /// question's label to match. Throws on duplicate ids or empty token
    /// sequences. Ids missing from `split` are treated as train.
    Dataset(std::vector<Question> questions, std::map<std::string, Split> split = {});

    const std::vector<Question>& questions() const noexcept { return questions_; }
    const std::vector<AnswerLabel>& answer_vocab() const noexcept { return vocab_; }
    const std::map<std::string, Split>& split() const noexcept { return split_; }

    std::size_t size() const noexcept { return questions_.size(); }
    bool empty() const noexcept { return questions_.empty(); }

    Split split_of(const std::string& id) const;
    std::vector<Question> train_questions() const;
    std::vector<Question> test_questions() const;

    std::optional<AnswerLabel> find_answer(std::string_view canonical_name) const;
    const Question* find_question(std::string_view id) const;

    /// Training-split questions whose answer has the given canonical name.
    std::span<const std::size_t> train_indices_for(std::string_view canonical_name) const;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.questions_ == b.questions_ && a.vocab_ == b.vocab_ && a.split_ == b.split_;
    }

private:
    std::vector<Question> questions_;
    std::vector<AnswerLabel> vocab_;
    std::map<std::string, Split> split_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> train_by_answer_;
};

enum class DatasetFormat { JsonLines };

/// Reads the JSON-lines question schema. Malformed records raise an
/// Error whose message names the 1-based line number.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::JsonLines);
Dataset read_dataset(std::istream& in, DatasetFormat format = DatasetFormat::JsonLines);

void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/// One JSONL record for `q`; `split` is emitted when provided.
std::string question_to_jsonl(const Question& q, std::optional<Split> split = std::nullopt);

// ---------------------------------------------------------------------------
// Submission validation

struct ValidationPolicy {
    std::size_t min_tokens = 10;
    std::size_t max_tokens = 200;
    double dup_threshold = 0.8;
    std::unordered_set<std::string> blocklist;
};

/// Blocklist file: one lowercase token per line; blank lines and lines
/// starting with '#' are skipped.
std::unordered_set<std::string> load_blocklist(const std::filesystem::path& path);

enum class RejectReason { TooShort, TooLong, Vulgar, DuplicateOfTraining, DuplicateOfSubmission };

std::string_view to_string(RejectReason r);

struct ValidationVerdict {
    std::optional<RejectReason> reason;  ///< nullopt means Accept
    std::string matched_id;              ///< duplicate partner, if any

    bool accepted() const noexcept { return !reason.has_value(); }
    static ValidationVerdict accept() { return {}; }
    static ValidationVerdict reject(RejectReason r, std::string matched = {}) {
        return {r, std::move(matched)};
    }
};

double jaccard(const TokenSequence& a, const TokenSequence& b);

/// Checks, in order: duplicate of a same-answer training question, duplicate
/// of a same-answer prior submission, length bounds, blocklist.
ValidationVerdict validate_submission(const Question& q, const Dataset& train,
                                      const ValidationPolicy& policy,
                                      std::span<const Question> prior_submissions = {});

} // namespace advqa
