#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advqa/corpus.hpp"
#include "advqa/qa_model.hpp"

namespace advqa {

enum class Granularity { Word, Sentence };

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view s);

/// Token counts of the prefixes evaluated for `q`: 1..n for Word, the
/// sentence ends for Sentence. Always ends with n.
std::vector<std::size_t> prefix_lengths(const Question& q, Granularity g);

struct BuzzResult {
    /// Revealed fraction at the first prefix whose top-1 guess is correct.
    std::optional<double> first_correct_fraction;
    /// Revealed fraction from which every longer prefix is correct too.
    std::optional<double> stable_correct_fraction;
    /// Top-1 class index per evaluated prefix (npos if the model returned
    /// no guess).
    std::vector<std::size_t> per_prefix_top1;
    std::vector<std::size_t> prefix_lengths;

    friend bool operator==(const BuzzResult&, const BuzzResult&) = default;
};

BuzzResult buzz(const QAModel& model, const Question& q, Granularity g = Granularity::Word);

struct AccuracyCurve {
    std::vector<double> positions;
    std::vector<double> accuracy;
    std::size_t n_questions = 0;
    Granularity granularity = Granularity::Word;
};

/// `steps` evenly spaced fractions (i / steps for i = 1..steps).
std::vector<double> default_grid(std::size_t steps = 20);

/// Accuracy of the top-1 guess on the ceil(p * n)-token prefix of every
/// question, for each grid fraction p. Under Sentence granularity the
/// prefix is cut back to the last complete sentence. Grid fractions must
/// lie in (0, 1] and ascend.
AccuracyCurve accuracy_curve(const QAModel& model, std::span<const Question> qs, std::span<const double> grid,
                             Granularity g = Granularity::Word);

struct QuestionSet {
    std::string name;
    std::vector<Question> questions;
};

struct TransferTable {
    std::vector<std::string> models;
    std::vector<std::string> sets;
    std::vector<std::vector<double>> accuracy;  ///< [model][set], full-question
};

TransferTable transfer_table(std::span<const QAModel* const> models, std::span<const QuestionSet> sets);

struct BuzzStats {
    std::optional<double> mean_first_fraction;  ///< over buzzed questions only
    double accuracy = 0.0;                      ///< full-question top-1
    std::size_t n_buzzed = 0;
    std::size_t n_questions = 0;
};

BuzzStats mean_buzz_stats(const QAModel& model, std::span<const Question> qs, Granularity g = Granularity::Word);

/// Full-question top-1 accuracy.
double full_accuracy(const QAModel& model, std::span<const Question> qs);

// Output formats --------------------------------------------------------------

struct CurveRecord {
    std::string model_id;
    std::string dataset_id;
    AccuracyCurve curve;
};

/// Header "model,dataset,<p1>,<p2>,...", one row per record. All records
/// must share a grid.
void write_curves_csv(std::ostream& out, std::span<const CurveRecord> records);
void write_curves_json(std::ostream& out, std::span<const CurveRecord> records);

/// Header "model,<set1>,<set2>,...", one row per model.
void write_transfer_csv(std::ostream& out, const TransferTable& table);
void write_transfer_json(std::ostream& out, const TransferTable& table, Granularity g);

} // namespace advqa
