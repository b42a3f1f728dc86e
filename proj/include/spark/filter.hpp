#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spark/backend.hpp"
#include "spark/error.hpp"
#include "spark/ideagen.hpp"
#include "spark/xplor.hpp"

namespace spark {

class PartialReviewError : public BackendError {
public:
    PartialReviewError(const std::string& what, std::vector<int> completed)
        : BackendError(what), completed_(std::move(completed)) {}
    const std::vector<int>& completed() const noexcept { return completed_; }

private:
    std::vector<int> completed_;
};

class DecisionParseError : public ParseError {
public:
    using ParseError::ParseError;
};

enum class Decision { accept, reject };

NLOHMANN_JSON_SERIALIZE_ENUM(Decision, {{Decision::accept, "ACCEPT"}, {Decision::reject, "REJECT"}})

/// Case-insensitive "accept"/"reject", surrounding whitespace ignored.
std::optional<Decision> parse_decision_token(const std::string& token);

struct ReviewCritique {
    std::string idea_id;
    int reviewer_index = 1;
    std::string text;

    bool operator==(const ReviewCritique&) const = default;
};

struct FilterDecision {
    std::string idea_id;
    std::string reasoning;
    Decision decision = Decision::reject;
    double utility = 0.0;

    bool operator==(const FilterDecision&) const = default;
};

void to_json(json& j, const ReviewCritique& r);
void from_json(const json& j, ReviewCritique& r);
void to_json(json& j, const FilterDecision& d);
void from_json(const json& j, FilterDecision& d);

/// {"Decision reasoning", "Decision", "Utility"} as exchanged with the model.
json decision_response_json(const FilterDecision& d);

/// Parses a decision reply; nullopt if a key is missing or the decision token
/// is unknown. Utility outside [0, 1] is clamped with a warning.
std::optional<FilterDecision> parse_decision_response(const std::string& text,
                                                      const std::string& idea_id);

/// `n` critiques, one request per reviewer persona. Each request carries only
/// the idea's title and abstract.
std::vector<ReviewCritique> generate_reviews(const IdeaProposal& idea, int n, Backend& reviewer,
                                             const ChatSettings& settings);

FilterDecision synthesize_decision(const IdeaProposal& idea,
                                   const std::vector<ReviewCritique>& reviews, Backend& decider,
                                   const ChatSettings& settings);

struct FilterConfig {
    int reviews_per_idea = 3;
};

void to_json(json& j, const FilterConfig& c);
void from_json(const json& j, FilterConfig& c);

struct FilterRoles {
    Backend& reviewer;
    ChatSettings review;
    Backend& decider;
    ChatSettings decide;
};

/// Result for one idea: a decision, or an error message.
struct FilterOutcome {
    std::string idea_id;
    std::vector<ReviewCritique> reviews;
    std::optional<FilterDecision> decision;
    std::optional<std::string> error;
};

void to_json(json& j, const FilterOutcome& o);
void from_json(const json& j, FilterOutcome& o);

/// Reviews and decides every idea. Per-idea failures become error entries;
/// output order follows input order.
std::vector<FilterOutcome> filter_batch(const std::vector<IdeaProposal>& ideas,
                                        const FilterConfig& config, FilterRoles roles);

}  // namespace spark
