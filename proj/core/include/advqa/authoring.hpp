#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "advqa/buzzer.hpp"
#include "advqa/corpus.hpp"
#include "advqa/prediction.hpp"
#include "advqa/qa_model.hpp"

namespace advqa {

/// Model output shown to an author for one draft.
struct DraftFeedback {
    TokenSequence tokens;  ///< server tokenization the evidence aligns with
    GuessList guesses;     ///< top five
    BuzzResult buzz;
    Granularity granularity = Granularity::Sentence;
    EvidenceMap evidence;          ///< for `evidence_class`
    std::size_t evidence_class = 0;
    bool top1_correct = false;

    friend bool operator==(const DraftFeedback&, const DraftFeedback&) = default;
};

struct EditEvent {
    std::uint64_t seq = 0;  ///< 1-based, gapless per session
    std::int64_t timestamp_ms = 0;
    std::string draft_text;
    DraftFeedback feedback;
};

enum class SessionState { Open, Submitted, Abandoned };

std::string_view to_string(SessionState s);

struct EditSession {
    std::string session_id;
    std::string author_id;
    std::string target_model;
    AnswerLabel chosen_answer;
    Category category = Category::Other;
    std::int64_t created_ms = 0;
    std::vector<EditEvent> events;
    SessionState state = SessionState::Open;
    std::optional<ValidationVerdict> last_verdict;
};

struct TrajectoryPoint {
    std::uint64_t seq = 0;
    std::size_t length = 0;  ///< draft length in tokens
    std::optional<double> first_correct_fraction;

    friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

using BuzzTrajectory = std::vector<TrajectoryPoint>;

/// Which class the per-token evidence explains.
enum class EvidenceTarget { TopGuess, ChosenAnswer };

struct ServiceConfig {
    /// Root for session logs, the snapshot index and accepted submissions.
    /// Empty disables persistence.
    std::filesystem::path data_dir;
    ValidationPolicy policy;
    EvidenceTarget evidence_target = EvidenceTarget::TopGuess;
    Granularity default_granularity = Granularity::Sentence;
    std::size_t guesses_shown = 5;
    std::function<std::int64_t()> clock;  ///< ms since epoch; system clock when unset
};

struct ModelInfo {
    std::string id;
    ModelFamily family;
    std::size_t num_answers;
};

/// Live adversarial-writing backend.
///
/// Models and training data are shared and immutable. Every operation on a
/// session runs under that session's lock, so events of different sessions
/// never interleave and each session's log has a single writer. Session
/// logs are append-only JSON lines under `<data_dir>/sessions/`; the
/// constructor replays them, so a restarted service resumes every session.
class AuthoringService {
public:
    AuthoringService(std::vector<std::shared_ptr<const QAModel>> models, std::shared_ptr<const Dataset> train,
                     ServiceConfig config = {});
    ~AuthoringService();

    AuthoringService(const AuthoringService&) = delete;
    AuthoringService& operator=(const AuthoringService&) = delete;

    EditSession create_session(const std::string& author_id, const std::string& model_id,
                               const std::string& answer, Category category = Category::Other);

    /// Scores the draft against the session's model, appends an EditEvent
    /// and returns its feedback.
    EditEvent evaluate_draft(const std::string& session_id, const std::string& draft_text,
                             std::optional<Granularity> granularity = std::nullopt);

    /// Validates the latest draft. Accept persists the question and closes
    /// the session; Reject leaves it open.
    ValidationVerdict submit(const std::string& session_id);

    void abandon(const std::string& session_id);

    /// One point per event, read from stored feedback.
    BuzzTrajectory trajectory(const std::string& session_id) const;

    EditSession session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

    std::vector<ModelInfo> models() const;
    const QAModel& model(const std::string& model_id) const;

    /// Labels of `model_id` (or of every model, deduplicated) whose name
    /// starts with `prefix`, ignoring case and treating '_' as ' '.
    std::vector<AnswerLabel> answers(std::string_view prefix, const std::string& model_id = {},
                                     std::size_t limit = 50) const;

    std::vector<Question> submissions() const;

    /// Feedback for `draft_text` without touching any session.
    DraftFeedback compute_feedback(const QAModel& model, const AnswerLabel& answer, const std::string& draft_text,
                                   Granularity granularity) const;

    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct Slot {
        mutable std::mutex mutex;
        EditSession session;
    };

    std::shared_ptr<Slot> slot(const std::string& session_id) const;
    std::filesystem::path session_log(const std::string& session_id) const;
    void append_record(const std::string& session_id, const std::string& line) const;
    void write_index() const;
    void load();
    std::int64_t now() const;
    std::string next_session_id();

    std::map<std::string, std::shared_ptr<const QAModel>> models_;
    std::shared_ptr<const Dataset> train_;
    ServiceConfig config_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::uint64_t next_id_ = 1;

    mutable std::mutex submissions_mutex_;
    std::vector<Question> submissions_;

    mutable std::mutex index_mutex_;
};

// JSON encodings shared by the log and the HTTP layer.
std::string feedback_to_json(const DraftFeedback& f);
DraftFeedback feedback_from_json(const std::string& text);

} // namespace advqa
