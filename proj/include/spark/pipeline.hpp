#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spark/clock.hpp"
#include "spark/config.hpp"
#include "spark/filter.hpp"
#include "spark/ideagen.hpp"
#include "spark/xplor.hpp"

namespace spark {

struct StageTiming {
    std::string stage;
    std::string started_at;
    std::string finished_at;
    long long duration_ms = 0;

    bool operator==(const StageTiming&) const = default;
};

void to_json(json& j, const StageTiming& t);
void from_json(const json& j, StageTiming& t);

/// Everything one pipeline run produced. An incomplete report names the stage
/// that stopped the run and keeps whatever earlier stages produced.
struct PipelineReport {
    std::string question;
    bool complete = true;
    std::optional<std::string> incomplete_stage;
    std::optional<std::string> error;
    std::string config_hash;
    std::string prompts_version;
    EvidenceSet evidence;
    std::vector<EvidenceSet> refinement_evidence;
    std::optional<ConceptSet> concepts;
    std::vector<IdeaProposal> ideas;
    std::vector<FilterOutcome> outcomes;
    std::vector<std::string> accepted_ideas;
    std::vector<std::string> warnings;
    std::vector<StageTiming> timings;

    std::size_t review_count() const;
    std::vector<FilterDecision> decisions() const;
};

void to_json(json& j, const PipelineReport& r);
void from_json(const json& j, PipelineReport& r);

/// Retrieval, ideation, filtering and refinement over borrowed components.
class Pipeline {
public:
    struct Backends {
        Backend& generator;
        Backend& reviewer;
        Backend& decider;
    };

    Pipeline(const PipelineConfig& config, Xplor& xplor, Backends backends, Clock& clock);

    PipelineReport run(const std::string& question);

private:
    void refine_all(PipelineReport& report, IdeaGenerator& generator, FilterRoles roles);

    const PipelineConfig& config_;
    Xplor& xplor_;
    Backends backends_;
    Clock& clock_;
};

}  // namespace spark
