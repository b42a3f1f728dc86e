#include "spark/pipeline.hpp"

#include <spdlog/spdlog.h>

#include "spark/prompts.hpp"

namespace spark {

void to_json(json& j, const StageTiming& t) {
    j = json{{"stage", t.stage},
             {"started_at", t.started_at},
             {"finished_at", t.finished_at},
             {"duration_ms", t.duration_ms}};
}

void from_json(const json& j, StageTiming& t) {
    t.stage = j.at("stage").get<std::string>();
    t.started_at = j.at("started_at").get<std::string>();
    t.finished_at = j.at("finished_at").get<std::string>();
    t.duration_ms = j.at("duration_ms").get<long long>();
}

std::size_t PipelineReport::review_count() const {
    std::size_t n = 0;
    for (const auto& o : outcomes) n += o.reviews.size();
    return n;
}

std::vector<FilterDecision> PipelineReport::decisions() const {
    std::vector<FilterDecision> out;
    for (const auto& o : outcomes)
        if (o.decision) out.push_back(*o.decision);
    return out;
}

namespace {

template <typename T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_get(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<T>();
}

}  // namespace

void to_json(json& j, const PipelineReport& r) {
    j = json{{"question", r.question},
             {"complete", r.complete},
             {"incomplete_stage", opt_json(r.incomplete_stage)},
             {"error", opt_json(r.error)},
             {"config_hash", r.config_hash},
             {"prompts_version", r.prompts_version},
             {"evidence", r.evidence},
             {"refinement_evidence", r.refinement_evidence},
             {"concepts", opt_json(r.concepts)},
             {"ideas", r.ideas},
             {"filter", r.outcomes},
             {"accepted_ideas", r.accepted_ideas},
             {"warnings", r.warnings},
             {"timings", r.timings}};
}

void from_json(const json& j, PipelineReport& r) {
    r.question = j.at("question").get<std::string>();
    r.complete = j.at("complete").get<bool>();
    r.incomplete_stage = opt_get<std::string>(j, "incomplete_stage");
    r.error = opt_get<std::string>(j, "error");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.prompts_version = j.at("prompts_version").get<std::string>();
    r.evidence = j.at("evidence").get<EvidenceSet>();
    r.refinement_evidence = j.at("refinement_evidence").get<std::vector<EvidenceSet>>();
    r.concepts = opt_get<ConceptSet>(j, "concepts");
    r.ideas = j.at("ideas").get<std::vector<IdeaProposal>>();
    r.outcomes = j.at("filter").get<std::vector<FilterOutcome>>();
    r.accepted_ideas = j.at("accepted_ideas").get<std::vector<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.timings = j.at("timings").get<std::vector<StageTiming>>();
}

Pipeline::Pipeline(const PipelineConfig& config, Xplor& xplor, Backends backends, Clock& clock)
    : config_(config), xplor_(xplor), backends_(backends), clock_(clock) {}

namespace {

class StageTimer {
public:
    StageTimer(std::string stage, Clock& clock, std::vector<StageTiming>& sink)
        : clock_(clock), sink_(sink), start_(clock.now()) {
        timing_.stage = std::move(stage);
    }
    ~StageTimer() {
        auto end = clock_.now();
        timing_.started_at = format_timestamp(start_);
        timing_.finished_at = format_timestamp(end);
        timing_.duration_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(end - start_).count();
        sink_.push_back(std::move(timing_));
    }

private:
    Clock& clock_;
    std::vector<StageTiming>& sink_;
    Clock::time_point start_;
    StageTiming timing_;
};

void mark_incomplete(PipelineReport& r, const std::string& stage, const std::string& why) {
    spdlog::warn("pipeline stopped at {}: {}", stage, why);
    r.complete = false;
    r.incomplete_stage = stage;
    r.error = why;
}

}  // namespace

PipelineReport Pipeline::run(const std::string& question) {
    PipelineReport report;
    report.question = question;
    report.config_hash = config_.hash();
    report.prompts_version = prompts::kVersion;

    try {
        StageTimer t("retrieval", clock_, report.timings);
        report.evidence = xplor_.evidence_loop(question);
    } catch (const Error& e) {
        mark_incomplete(report, "retrieval", e.what());
        return report;
    }
    if (report.evidence.empty()) {
        mark_incomplete(report, "ideation", "no evidence reached the inclusion threshold");
        return report;
    }

    IdeaGenerator generator(config_.ideagen, backends_.generator,
                            config_.role(Role::generator).chat_settings());
    try {
        StageTimer t("ideation", clock_, report.timings);
        report.concepts = extract_concepts_and_problems(
            report.evidence, backends_.generator, config_.role(Role::generator).chat_settings());
        report.ideas = generator.generate_all(report.evidence, *report.concepts);
    } catch (const Error& e) {
        mark_incomplete(report, "ideation", e.what());
        return report;
    }

    FilterRoles roles{backends_.reviewer, config_.role(Role::reviewer).chat_settings(),
                      backends_.decider, config_.role(Role::decider).chat_settings()};
    {
        StageTimer t("filtering", clock_, report.timings);
        report.outcomes = filter_batch(report.ideas, config_.filter, roles);
    }
    {
        StageTimer t("refinement", clock_, report.timings);
        refine_all(report, generator, roles);
    }

    for (const auto& o : report.outcomes)
        if (o.decision && o.decision->decision == Decision::accept)
            report.accepted_ideas.push_back(o.idea_id);
    return report;
}

void Pipeline::refine_all(PipelineReport& report, IdeaGenerator& generator, FilterRoles roles) {
    const std::size_t initial = report.outcomes.size();
    for (std::size_t i = 0; i < initial; ++i) {
        if (!report.outcomes[i].decision) continue;
        IdeaProposal current = report.ideas[i];
        FilterDecision feedback = *report.outcomes[i].decision;
        while (generator.needs_refinement(feedback) &&
               current.refinement_depth < config_.ideagen.max_refinements) {
            Refinement r;
            try {
                r = generator.refine_idea(current, feedback, xplor_, *report.concepts);
            } catch (const Error& e) {
                report.warnings.push_back("refining " + current.idea_id + " failed: " + e.what());
                break;
            }
            report.refinement_evidence.push_back(r.evidence);
            report.ideas.push_back(r.idea);
            auto outcome = filter_batch({r.idea}, config_.filter, roles).front();
            report.outcomes.push_back(outcome);
            if (!outcome.decision) break;
            current = r.idea;
            feedback = *outcome.decision;
        }
    }
}

}  // namespace spark
