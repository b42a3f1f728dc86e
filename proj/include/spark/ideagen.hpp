#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spark/backend.hpp"
#include "spark/error.hpp"
#include "spark/xplor.hpp"

namespace spark {

struct FilterDecision;

class ExtractionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class IdeaParseError : public ParseError {
public:
    using ParseError::ParseError;
};
class RefinementLimitError : public UsageError {
public:
    using UsageError::UsageError;
};

struct ConceptSet {
    std::vector<std::string> concepts;
    std::vector<std::string> open_problems;
    std::string domain_tag;

    /// Canonical label for `label` (case-insensitive), if present.
    std::optional<std::string> find(const std::string& label) const;
};

void to_json(json& j, const ConceptSet& c);
void from_json(const json& j, ConceptSet& c);

/// Trims, caps each label at 8 words, drops empties and case-insensitive
/// duplicates (first spelling wins).
std::vector<std::string> normalize_concepts(const std::vector<std::string>& labels);

struct IdeaProposal {
    std::string idea_id;
    std::vector<std::string> input_concepts;
    std::vector<std::string> new_concepts;
    std::string plan;
    std::string title;
    std::string abstract;
    std::string evidence_ref;
    std::string problem;
    std::optional<std::string> parent_id;
    int refinement_depth = 0;

    bool operator==(const IdeaProposal&) const = default;
};

inline constexpr std::size_t kMaxTitleLength = 300;

/// Full record, including provenance fields (ideas.jsonl layout).
void to_json(json& j, const IdeaProposal& idea);
void from_json(const json& j, IdeaProposal& idea);

/// The five generated fields only, with the wire names the model is asked for.
json idea_response_json(const IdeaProposal& idea);

/// Parses a model reply carrying input_concepts, new_concepts, plan, title
/// and abstract. Returns nullopt when a field is missing or mistyped or the
/// title/abstract rules fail.
std::optional<IdeaProposal> parse_idea_response(const std::string& text);

ConceptSet extract_concepts_and_problems(const EvidenceSet& evidence, Backend& backend,
                                         const ChatSettings& settings);

ChatRequest build_idea_prompt(const std::string& problem, const ConceptSet& concepts,
                              const std::string& domain, const ChatSettings& settings);

/// Sends the prompt, parses the reply (one repair retry) and checks that the
/// chosen input concepts come from `concepts`. Provenance fields are left
/// for the caller.
IdeaProposal generate_idea(const ChatRequest& prompt, const ConceptSet& concepts,
                           Backend& backend);

struct IdeaGenConfig {
    double refine_threshold = 0.5;
    int max_refinements = 2;

    void validate() const;
};

void to_json(json& j, const IdeaGenConfig& c);
void from_json(const json& j, IdeaGenConfig& c);

struct Refinement {
    IdeaProposal idea;
    EvidenceSet evidence;
};

/// Assigns idea ids ("idea_<n>") and drives generation and refinement.
class IdeaGenerator {
public:
    IdeaGenerator(IdeaGenConfig config, Backend& backend, ChatSettings settings);

    const IdeaGenConfig& config() const { return config_; }

    /// One idea per open problem, in problem order.
    std::vector<IdeaProposal> generate_all(const EvidenceSet& evidence, const ConceptSet& concepts);

    IdeaProposal generate(const std::string& problem, const ConceptSet& concepts,
                          const std::string& evidence_ref);

    /// True when `feedback` calls for another attempt (REJECT, or utility
    /// below refine_threshold).
    bool needs_refinement(const FilterDecision& feedback) const;

    /// Retrieves more literature aimed at the critique and regenerates. The new
    /// idea links back to `idea`. Throws UsageError if the feedback does not
    /// call for refinement and RefinementLimitError once the chain would exceed
    /// max_refinements.
    Refinement refine_idea(const IdeaProposal& idea, const FilterDecision& feedback, Xplor& xplor,
                           const ConceptSet& concepts);

private:
    std::string next_id();
    /// Keeps ids issued elsewhere from being handed out again.
    void observe_id(const std::string& id);

    IdeaGenConfig config_;
    Backend& backend_;
    ChatSettings settings_;
    int counter_ = 0;
};

/// Search query aimed at the weakness named in a review decision.
std::string refinement_query(const IdeaProposal& idea, const std::string& reasoning);

}  // namespace spark
