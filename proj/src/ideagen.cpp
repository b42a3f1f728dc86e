#include "spark/ideagen.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spark/filter.hpp"
#include "spark/prompts.hpp"
#include "spark/text.hpp"

namespace spark {

namespace {

constexpr std::size_t kMaxConceptWords = 8;

ChatRequest request(std::string_view system, std::string user, const ChatSettings& s,
                    ResponseFormat format) {
    ChatRequest req;
    req.system_prompt = std::string(system);
    req.user_prompt = std::move(user);
    req.model_id = s.model_id;
    req.temperature = s.temperature;
    req.max_tokens = s.max_tokens;
    req.response_format = format;
    return req;
}

std::optional<std::vector<std::string>> string_list(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& v : obj[key]) {
        if (!v.is_string()) return std::nullopt;
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::optional<std::string> string_field(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_string()) return std::nullopt;
    return obj[key].get<std::string>();
}

std::string first_sentence(const std::string& text, std::size_t max_len) {
    auto t = trim(text);
    auto stop = t.find_first_of(".!?\n");
    if (stop != std::string::npos) t = t.substr(0, stop);
    if (t.size() > max_len) t = utf8_slice(t, 0, max_len);
    return trim(t);
}

}  // namespace

std::optional<std::string> ConceptSet::find(const std::string& label) const {
    auto want = to_lower(trim(label));
    for (const auto& c : concepts)
        if (to_lower(c) == want) return c;
    return std::nullopt;
}

void to_json(json& j, const ConceptSet& c) {
    j = json{{"concepts", c.concepts}, {"open_problems", c.open_problems},
             {"domain_tag", c.domain_tag}};
}

void from_json(const json& j, ConceptSet& c) {
    c.concepts = j.at("concepts").get<std::vector<std::string>>();
    c.open_problems = j.at("open_problems").get<std::vector<std::string>>();
    c.domain_tag = j.value("domain_tag", "");
}

std::vector<std::string> normalize_concepts(const std::vector<std::string>& labels) {
    std::vector<std::string> out;
    std::vector<std::string> seen;
    for (const auto& raw : labels) {
        std::istringstream words(trim(raw));
        std::string word, label;
        std::size_t count = 0;
        while (words >> word && count < kMaxConceptWords) {
            label += (label.empty() ? "" : " ") + word;
            ++count;
        }
        if (label.empty()) continue;
        auto key = to_lower(label);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        out.push_back(label);
    }
    return out;
}

void to_json(json& j, const IdeaProposal& idea) {
    j = json{{"idea_id", idea.idea_id},
             {"input_concepts", idea.input_concepts},
             {"new_concepts", idea.new_concepts},
             {"plan", idea.plan},
             {"title", idea.title},
             {"abstract", idea.abstract},
             {"evidence_ref", idea.evidence_ref},
             {"problem", idea.problem},
             {"parent_id", idea.parent_id ? json(*idea.parent_id) : json(nullptr)},
             {"refinement_depth", idea.refinement_depth}};
}

void from_json(const json& j, IdeaProposal& idea) {
    idea.idea_id = j.at("idea_id").get<std::string>();
    idea.input_concepts = j.at("input_concepts").get<std::vector<std::string>>();
    idea.new_concepts = j.at("new_concepts").get<std::vector<std::string>>();
    idea.plan = j.at("plan").get<std::string>();
    idea.title = j.at("title").get<std::string>();
    idea.abstract = j.at("abstract").get<std::string>();
    idea.evidence_ref = j.value("evidence_ref", "");
    idea.problem = j.value("problem", "");
    if (j.contains("parent_id") && !j["parent_id"].is_null())
        idea.parent_id = j["parent_id"].get<std::string>();
    else
        idea.parent_id.reset();
    idea.refinement_depth = j.value("refinement_depth", 0);
}

json idea_response_json(const IdeaProposal& idea) {
    return json{{"input_concepts", idea.input_concepts},
                {"new_concepts", idea.new_concepts},
                {"plan", idea.plan},
                {"title", idea.title},
                {"abstract", idea.abstract}};
}

std::optional<IdeaProposal> parse_idea_response(const std::string& text) {
    auto obj = extract_json_object(text);
    if (!obj) return std::nullopt;
    auto input = string_list(*obj, "input_concepts");
    auto fresh = string_list(*obj, "new_concepts");
    auto plan = string_field(*obj, "plan");
    auto title = string_field(*obj, "title");
    auto abstract = string_field(*obj, "abstract");
    if (!input || !fresh || !plan || !title || !abstract) return std::nullopt;

    IdeaProposal idea;
    idea.input_concepts = std::move(*input);
    idea.new_concepts = std::move(*fresh);
    idea.plan = std::move(*plan);
    idea.title = trim(*title);
    idea.abstract = trim(*abstract);
    if (idea.title.empty() || utf8_length(idea.title) > kMaxTitleLength) return std::nullopt;
    if (idea.abstract.empty()) return std::nullopt;
    return idea;
}

ConceptSet extract_concepts_and_problems(const EvidenceSet& evidence, Backend& backend,
                                         const ChatSettings& settings) {
    if (evidence.empty()) throw UsageError("concept extraction needs non-empty evidence");
    auto req = request(prompts::kConceptSystem,
                       render_template(prompts::kConceptUser,
                                       {{"question", evidence.question},
                                        {"context", render_evidence_context(evidence)}}),
                       settings, ResponseFormat::json_object);

    auto parse = [](const std::string& text) -> std::optional<json> {
        auto obj = extract_json_object(text);
        if (!obj || !string_list(*obj, "concepts") || !string_list(*obj, "open_problems"))
            return std::nullopt;
        return obj;
    };
    auto obj = parse(backend.chat_complete(req).text);
    if (!obj) {
        req.user_prompt += prompts::kJsonRepair;
        obj = parse(backend.chat_complete(req).text);
        if (!obj) throw ExtractionError("concept extraction reply is not valid JSON");
    }

    ConceptSet out;
    out.concepts = normalize_concepts(*string_list(*obj, "concepts"));
    if (auto d = string_field(*obj, "domain")) out.domain_tag = trim(*d);

    const auto sources = evidence.source_ids();
    const auto problems = *string_list(*obj, "open_problems");
    for (const auto& raw : problems) {
        auto problem = trim(raw);
        auto tokens = bracket_tokens(problem);
        bool grounded = std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
            return std::find(sources.begin(), sources.end(), t) != sources.end();
        });
        if (!problem.empty() && grounded)
            out.open_problems.push_back(problem);
        else
            spdlog::warn("dropping open problem without a known source: {}", prefix_of(problem));
    }
    if (out.concepts.empty()) throw ExtractionError("no concepts extracted from evidence");
    if (out.open_problems.empty())
        throw ExtractionError("no open problem cites a source present in the evidence");
    return out;
}

ChatRequest build_idea_prompt(const std::string& problem, const ConceptSet& concepts,
                              const std::string& domain, const ChatSettings& settings) {
    if (concepts.concepts.empty()) throw UsageError("idea prompt needs at least one concept");
    std::string list;
    for (const auto& c : concepts.concepts) list += (list.empty() ? "" : ", ") + c;
    auto d = trim(domain);
    std::string domain_line = d.empty() ? "" : "Domain: " + d + "\n";
    return request(prompts::kIdeaSystem,
                   render_template(prompts::kIdeaUser, {{"problem", problem},
                                                        {"concepts", list},
                                                        {"domain_line", domain_line}}),
                   settings, ResponseFormat::json_object);
}

IdeaProposal generate_idea(const ChatRequest& prompt, const ConceptSet& concepts,
                           Backend& backend) {
    auto idea = parse_idea_response(backend.chat_complete(prompt).text);
    if (!idea) {
        spdlog::info("idea reply did not match the template; retrying once");
        ChatRequest repair = prompt;
        repair.user_prompt +=
            "\n\nReturn only valid JSON with all five fields: input_concepts, new_concepts, "
            "plan, title, abstract.";
        idea = parse_idea_response(backend.chat_complete(repair).text);
        if (!idea) throw IdeaParseError("idea reply is missing template fields after repair");
    }
    for (auto& c : idea->input_concepts) {
        auto canonical = concepts.find(c);
        if (!canonical)
            throw ValidationError("input concept '" + c + "' is not among the extracted concepts");
        c = *canonical;
    }
    return *idea;
}

void IdeaGenConfig::validate() const {
    if (!(refine_threshold >= 0.0 && refine_threshold <= 1.0))
        throw UsageError("refine_threshold must be in [0, 1]");
    if (max_refinements < 0) throw UsageError("max_refinements must be >= 0");
}

void to_json(json& j, const IdeaGenConfig& c) {
    j = json{{"refine_threshold", c.refine_threshold}, {"max_refinements", c.max_refinements}};
}

void from_json(const json& j, IdeaGenConfig& c) {
    IdeaGenConfig d;
    c.refine_threshold = j.value("refine_threshold", d.refine_threshold);
    c.max_refinements = j.value("max_refinements", d.max_refinements);
}

std::string refinement_query(const IdeaProposal& idea, const std::string& reasoning) {
    auto focus = first_sentence(reasoning, 200);
    return focus.empty() ? idea.title : idea.title + ": " + focus;
}

IdeaGenerator::IdeaGenerator(IdeaGenConfig config, Backend& backend, ChatSettings settings)
    : config_(config), backend_(backend), settings_(std::move(settings)) {
    config_.validate();
}

std::string IdeaGenerator::next_id() { return "idea_" + std::to_string(++counter_); }

void IdeaGenerator::observe_id(const std::string& id) {
    static const std::regex pattern(R"(idea_(\d+))");
    std::smatch m;
    if (std::regex_match(id, m, pattern)) counter_ = std::max(counter_, std::stoi(m[1].str()));
}

IdeaProposal IdeaGenerator::generate(const std::string& problem, const ConceptSet& concepts,
                                     const std::string& evidence_ref) {
    auto idea = generate_idea(build_idea_prompt(problem, concepts, concepts.domain_tag, settings_),
                              concepts, backend_);
    idea.idea_id = next_id();
    idea.problem = problem;
    idea.evidence_ref = evidence_ref;
    return idea;
}

std::vector<IdeaProposal> IdeaGenerator::generate_all(const EvidenceSet& evidence,
                                                      const ConceptSet& concepts) {
    std::vector<IdeaProposal> out;
    for (const auto& problem : concepts.open_problems)
        out.push_back(generate(problem, concepts, evidence.id));
    return out;
}

bool IdeaGenerator::needs_refinement(const FilterDecision& feedback) const {
    return feedback.decision == Decision::reject || feedback.utility < config_.refine_threshold;
}

Refinement IdeaGenerator::refine_idea(const IdeaProposal& idea, const FilterDecision& feedback,
                                      Xplor& xplor, const ConceptSet& concepts) {
    if (!needs_refinement(feedback))
        throw UsageError("idea " + idea.idea_id + " was accepted with utility " +
                         std::to_string(feedback.utility) + "; nothing to refine");
    if (idea.refinement_depth >= config_.max_refinements)
        throw RefinementLimitError("idea " + idea.idea_id + " already refined " +
                                   std::to_string(idea.refinement_depth) + " times (max " +
                                   std::to_string(config_.max_refinements) + ")");

    observe_id(idea.idea_id);
    Refinement out;
    out.evidence = xplor.evidence_loop(refinement_query(idea, feedback.reasoning));

    auto prompt = build_idea_prompt(idea.problem.empty() ? idea.title : idea.problem, concepts,
                                    concepts.domain_tag, settings_);
    std::ostringstream utility;
    utility << feedback.utility;
    prompt.user_prompt += render_template(
        prompts::kIdeaRefinement,
        {{"title", idea.title},
         {"abstract", idea.abstract},
         {"decision", feedback.decision == Decision::accept ? "ACCEPT" : "REJECT"},
         {"utility", utility.str()},
         {"reasoning", feedback.reasoning},
         {"context", out.evidence.empty() ? "(none)" : render_evidence_context(out.evidence)}});

    out.idea = generate_idea(prompt, concepts, backend_);
    out.idea.idea_id = next_id();
    out.idea.problem = idea.problem;
    out.idea.evidence_ref = out.evidence.id;
    out.idea.parent_id = idea.idea_id;
    out.idea.refinement_depth = idea.refinement_depth + 1;
    return out;
}

}  // namespace spark
