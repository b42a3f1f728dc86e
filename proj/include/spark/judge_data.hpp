#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spark/backend.hpp"
#include "spark/error.hpp"
#include "spark/text.hpp"
#include "spark/xplor.hpp"

namespace spark {

class TransformError : public ParseError {
public:
    using ParseError::ParseError;
};

/// One (submission, review) pair. The idea_* fields are filled by the
/// annotation step and stay empty when the rewrite was flagged.
struct AbstractReviewPair {
    std::string pair_id;
    std::string submission_id;
    std::string a_orig;
    std::string r_orig;
    std::optional<std::string> a_idea;
    std::optional<std::string> r_idea;
    std::string venue;
    std::optional<Date> submission_date;
    std::optional<double> review_score;
    bool idea_flagged = false;

    bool has_idea_fields() const { return a_idea.has_value() && r_idea.has_value(); }
    bool operator==(const AbstractReviewPair&) const = default;
};

void to_json(json& j, const AbstractReviewPair& p);
void from_json(const json& j, AbstractReviewPair& p);

struct ExtractReport {
    std::vector<AbstractReviewPair> pairs;
    std::size_t records_read = 0;
    std::size_t malformed_lines = 0;
    std::size_t missing_abstract = 0;
    std::size_t missing_review = 0;

    std::size_t skipped() const { return malformed_lines + missing_abstract + missing_review; }
};

void to_json(json& j, const ExtractReport& r);

/// Numeric rating from a dump field: numbers pass through, strings such as
/// "7: accept" yield their leading number.
std::optional<double> parse_review_score(const json& field);

/// Reads an OpenReview-style dump: one JSON object per line with
/// submission_id, abstract, date and either review_text (one review per line)
/// or a `reviews` array. Each review becomes one pair. Malformed lines and
/// records without abstract or review are skipped and counted. Throws
/// IngestionError if the file cannot be read.
ExtractReport extract_pairs(const std::filesystem::path& dump_path);

/// Names of the results-leak rules `text` violates; empty means clean.
std::vector<std::string> results_leak_violations(const std::string& text);

struct TransformResult {
    std::optional<std::string> text;  // empty when flagged
    bool flagged = false;
    int attempts = 0;
    std::vector<std::string> violations;
};

/// Rewrites an abstract without results or metrics. A reply that trips the
/// leak screen is regenerated once; a second violation flags the pair.
TransformResult transform_to_idea_abstract(const std::string& a_orig, Backend& annotator,
                                           const ChatSettings& settings);
TransformResult transform_to_idea_review(const std::string& r_orig, Backend& annotator,
                                         const ChatSettings& settings);

/// Runs both transforms for every pair (concurrently) and fills a_idea/r_idea.
void annotate_pairs(std::vector<AbstractReviewPair>& pairs, Backend& annotator,
                    const ChatSettings& settings);

enum class TaskKind { orig_review_pred, idea_review_pred, orig_abstract_gen, idea_abstract_gen };

NLOHMANN_JSON_SERIALIZE_ENUM(TaskKind, {{TaskKind::orig_review_pred, "orig_review_pred"},
                                        {TaskKind::idea_review_pred, "idea_review_pred"},
                                        {TaskKind::orig_abstract_gen, "orig_abstract_gen"},
                                        {TaskKind::idea_abstract_gen, "idea_abstract_gen"}})

std::string_view system_prompt_for(TaskKind task);

struct TrainingRecord {
    TaskKind task = TaskKind::orig_review_pred;
    std::string system_prompt;
    std::string input;
    std::string target;
    std::string pair_id;
    std::optional<Date> submission_date;

    bool operator==(const TrainingRecord&) const = default;
};

void to_json(json& j, const TrainingRecord& r);
void from_json(const json& j, TrainingRecord& r);

/// Four records per pair with both idea fields, two (the original-text tasks)
/// otherwise. Evaluation tasks map abstract -> review, generation tasks map
/// review -> abstract.
std::vector<TrainingRecord> build_training_records(const std::vector<AbstractReviewPair>& pairs);

struct SplitResult {
    std::vector<TrainingRecord> train;
    std::vector<TrainingRecord> test;
};

/// train: date <= cutoff, test: date > cutoff. All records of one pair go to
/// the same side, decided by the latest date among them. A record without a
/// date raises SplitError naming its pair.
SplitResult temporal_split(const std::vector<TrainingRecord>& records, const Date& cutoff);

/// sqrt(mean((p - a)^2)). Throws UsageError on empty or unequal inputs.
double score_rmse(std::span<const double> predicted, std::span<const double> actual);

/// Scores from a file: one JSON number per line, or objects with a "score"
/// (or "review_score") field.
std::vector<double> load_scores(const std::filesystem::path& path);

}  // namespace spark
