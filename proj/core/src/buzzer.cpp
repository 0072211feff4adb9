#include "advqa/buzzer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "advqa/error.hpp"

namespace advqa {
namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

bool top1_correct(const QAModel& model, const TokenSequence& prefix, const std::string& gold,
                  std::size_t* top_class = nullptr) {
    if (prefix.empty()) {
        if (top_class) {
            *top_class = kNone;
        }
        return false;
    }
    const auto g = model.guess(prefix, 1);
    if (top_class) {
        *top_class = g.empty() ? kNone : g.front().answer.class_index;
    }
    return !g.empty() && g.front().answer.canonical_name == gold;
}

TokenSequence prefix_of(const TokenSequence& tokens, std::size_t len) {
    return TokenSequence(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(len));
}

// ceil(p * n) guarded against representation error in p (0.15 * 20 is
// 3.0000000000000004 in binary).
std::size_t revealed_tokens(double p, std::size_t n) {
    const double raw = p * static_cast<double>(n);
    auto m = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(m, 1, n);
}

std::string format_fraction(double p) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << p;
    std::string shortest = s.str();
    // Prefer the short decimal when it round-trips (0.05 rather than
    // 0.050000000000000003).
    for (int prec = 1; prec < std::numeric_limits<double>::max_digits10; ++prec) {
        std::ostringstream t;
        t << std::setprecision(prec) << p;
        if (std::stod(t.str()) == p) {
            return t.str();
        }
    }
    return shortest;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    return out + "\"";
}

} // namespace

std::string_view to_string(Granularity g) { return g == Granularity::Word ? "word" : "sentence"; }

std::optional<Granularity> parse_granularity(std::string_view s) {
    if (s == "word") return Granularity::Word;
    if (s == "sentence") return Granularity::Sentence;
    return std::nullopt;
}

std::vector<std::size_t> prefix_lengths(const Question& q, Granularity g) {
    const std::size_t n = q.tokens.size();
    std::vector<std::size_t> out;
    if (n == 0) {
        return out;
    }
    if (g == Granularity::Word) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = i + 1;
        }
        return out;
    }
    for (auto end : sentence_boundaries(q.raw_text)) {
        if (end < n) {
            out.push_back(end);
        }
    }
    out.push_back(n);
    return out;
}

BuzzResult buzz(const QAModel& model, const Question& q, Granularity g) {
    BuzzResult r;
    r.prefix_lengths = prefix_lengths(q, g);
    const auto n = static_cast<double>(q.tokens.size());
    std::vector<bool> correct;
    correct.reserve(r.prefix_lengths.size());
    for (auto len : r.prefix_lengths) {
        std::size_t top = kNone;
        correct.push_back(top1_correct(model, prefix_of(q.tokens, len), q.answer.canonical_name, &top));
        r.per_prefix_top1.push_back(top);
    }
    for (std::size_t i = 0; i < correct.size(); ++i) {
        if (correct[i]) {
            r.first_correct_fraction = static_cast<double>(r.prefix_lengths[i]) / n;
            break;
        }
    }
    if (!correct.empty() && correct.back()) {
        std::size_t i = correct.size() - 1;
        while (i > 0 && correct[i - 1]) {
            --i;
        }
        r.stable_correct_fraction = static_cast<double>(r.prefix_lengths[i]) / n;
    }
    return r;
}

std::vector<double> default_grid(std::size_t steps) {
    std::vector<double> grid(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        grid[i] = static_cast<double>(i + 1) / static_cast<double>(steps);
    }
    return grid;
}

AccuracyCurve accuracy_curve(const QAModel& model, std::span<const Question> qs, std::span<const double> grid,
                             Granularity g) {
    if (qs.empty()) {
        throw Error("empty_question_set", "accuracy curve needs at least one question");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 && grid[i] <= 1.0) || (i > 0 && grid[i] <= grid[i - 1])) {
            throw Error("invalid_grid", "grid fractions must ascend within (0, 1]");
        }
    }
    AccuracyCurve curve;
    curve.positions.assign(grid.begin(), grid.end());
    curve.n_questions = qs.size();
    curve.granularity = g;
    std::vector<std::size_t> hits(grid.size(), 0);
    // Questions are visited in input order, so counts are order-stable.
    for (const auto& q : qs) {
        const std::size_t n = q.tokens.size();
        std::vector<std::size_t> bounds;
        if (g == Granularity::Sentence) {
            bounds = prefix_lengths(q, g);
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::size_t len = n == 0 ? 0 : revealed_tokens(grid[i], n);
            if (g == Granularity::Sentence) {
                auto it = std::upper_bound(bounds.begin(), bounds.end(), len);
                len = it == bounds.begin() ? 0 : *std::prev(it);
            }
            hits[i] += top1_correct(model, prefix_of(q.tokens, len), q.answer.canonical_name) ? 1 : 0;
        }
    }
    curve.accuracy.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        curve.accuracy[i] = static_cast<double>(hits[i]) / static_cast<double>(qs.size());
    }
    return curve;
}

double full_accuracy(const QAModel& model, std::span<const Question> qs) {
    if (qs.empty()) {
        throw Error("empty_question_set", "accuracy needs at least one question");
    }
    std::size_t hits = 0;
    for (const auto& q : qs) {
        hits += top1_correct(model, q.tokens, q.answer.canonical_name) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(qs.size());
}

TransferTable transfer_table(std::span<const QAModel* const> models, std::span<const QuestionSet> sets) {
    if (models.empty() || sets.empty()) {
        throw Error("invalid_argument", "transfer table needs at least one model and one set");
    }
    TransferTable t;
    for (const auto& s : sets) {
        t.sets.push_back(s.name);
    }
    const std::vector<double> full{1.0};
    for (const auto* m : models) {
        t.models.push_back(m->id());
        std::vector<double> row;
        for (const auto& s : sets) {
            row.push_back(accuracy_curve(*m, s.questions, full).accuracy.front());
        }
        t.accuracy.push_back(std::move(row));
    }
    return t;
}

BuzzStats mean_buzz_stats(const QAModel& model, std::span<const Question> qs, Granularity g) {
    BuzzStats s;
    s.n_questions = qs.size();
    double total = 0.0;
    std::size_t hits = 0;
    for (const auto& q : qs) {
        const auto r = buzz(model, q, g);
        if (r.first_correct_fraction) {
            total += *r.first_correct_fraction;
            ++s.n_buzzed;
        }
        // The final prefix is always the full question.
        hits += (!r.per_prefix_top1.empty() && r.per_prefix_top1.back() != kNone &&
                 model.labels()[r.per_prefix_top1.back()].canonical_name == q.answer.canonical_name)
                    ? 1
                    : 0;
    }
    if (s.n_buzzed > 0) {
        s.mean_first_fraction = total / static_cast<double>(s.n_buzzed);
    }
    if (!qs.empty()) {
        s.accuracy = static_cast<double>(hits) / static_cast<double>(qs.size());
    }
    return s;
}

void write_curves_csv(std::ostream& out, std::span<const CurveRecord> records) {
    if (records.empty()) {
        return;
    }
    const auto& grid = records.front().curve.positions;
    out << "model,dataset";
    for (double p : grid) {
        out << ',' << format_fraction(p);
    }
    out << '\n';
    for (const auto& r : records) {
        if (r.curve.positions != grid) {
            throw Error("invalid_argument", "curve records must share one grid");
        }
        out << csv_field(r.model_id) << ',' << csv_field(r.dataset_id);
        for (double a : r.curve.accuracy) {
            out << ',' << format_fraction(a);
        }
        out << '\n';
    }
}

void write_curves_json(std::ostream& out, std::span<const CurveRecord> records) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : records) {
        j.push_back({{"model_id", r.model_id},
                     {"dataset_id", r.dataset_id},
                     {"granularity", std::string(to_string(r.curve.granularity))},
                     {"grid", r.curve.positions},
                     {"accuracy", r.curve.accuracy},
                     {"n_questions", r.curve.n_questions}});
    }
    out << j.dump(2) << '\n';
}

void write_transfer_csv(std::ostream& out, const TransferTable& t) {
    out << "model";
    for (const auto& s : t.sets) {
        out << ',' << csv_field(s);
    }
    out << '\n';
    for (std::size_t m = 0; m < t.models.size(); ++m) {
        out << csv_field(t.models[m]);
        for (double a : t.accuracy[m]) {
            out << ',' << format_fraction(a);
        }
        out << '\n';
    }
}

void write_transfer_json(std::ostream& out, const TransferTable& t, Granularity g) {
    nlohmann::json j;
    j["models"] = t.models;
    j["sets"] = t.sets;
    j["accuracy"] = t.accuracy;
    j["granularity"] = std::string(to_string(g));
    j["grid"] = std::vector<double>{1.0};
    out << j.dump(2) << '\n';
}

} // namespace advqa
