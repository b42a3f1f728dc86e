#include "spark/filter.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <spdlog/spdlog.h>

#include "spark/prompts.hpp"
#include "spark/text.hpp"

namespace spark {

std::optional<Decision> parse_decision_token(const std::string& token) {
    auto t = to_lower(trim(token));
    if (t == "accept") return Decision::accept;
    if (t == "reject") return Decision::reject;
    return std::nullopt;
}

void to_json(json& j, const ReviewCritique& r) {
    j = json{{"idea_id", r.idea_id}, {"reviewer_index", r.reviewer_index}, {"text", r.text}};
}

void from_json(const json& j, ReviewCritique& r) {
    r.idea_id = j.at("idea_id").get<std::string>();
    r.reviewer_index = j.at("reviewer_index").get<int>();
    r.text = j.at("text").get<std::string>();
}

void to_json(json& j, const FilterDecision& d) {
    j = json{{"idea_id", d.idea_id}, {"reasoning", d.reasoning}, {"decision", d.decision},
             {"utility", d.utility}};
}

void from_json(const json& j, FilterDecision& d) {
    d.idea_id = j.at("idea_id").get<std::string>();
    d.reasoning = j.at("reasoning").get<std::string>();
    d.decision = j.at("decision").get<Decision>();
    d.utility = j.at("utility").get<double>();
}

json decision_response_json(const FilterDecision& d) {
    return json{{"Decision reasoning", d.reasoning}, {"Decision", d.decision}, {"Utility", d.utility}};
}

namespace {

// Exact wire key first, then a loose match ("decision_reasoning", "utility").
const json* lookup(const json& obj, const std::string& key) {
    if (obj.contains(key)) return &obj[key];
    auto loose = [](std::string s) {
        s = to_lower(s);
        s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '_'; }),
                s.end());
        return s;
    };
    const auto want = loose(key);
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (loose(it.key()) == want) return &it.value();
    return nullptr;
}

ChatRequest request(std::string system, std::string user, const ChatSettings& s,
                    ResponseFormat format) {
    ChatRequest req;
    req.system_prompt = std::move(system);
    req.user_prompt = std::move(user);
    req.model_id = s.model_id;
    req.temperature = s.temperature;
    req.max_tokens = s.max_tokens;
    req.response_format = format;
    return req;
}

}  // namespace

std::optional<FilterDecision> parse_decision_response(const std::string& text,
                                                      const std::string& idea_id) {
    auto obj = extract_json_object(text);
    if (!obj) return std::nullopt;
    const json* reasoning = lookup(*obj, "Decision reasoning");
    const json* decision = lookup(*obj, "Decision");
    const json* utility = lookup(*obj, "Utility");
    if (!reasoning || !decision || !utility) return std::nullopt;
    if (!reasoning->is_string() || !decision->is_string()) return std::nullopt;

    FilterDecision out;
    out.idea_id = idea_id;
    out.reasoning = trim(reasoning->get<std::string>());
    if (out.reasoning.empty()) return std::nullopt;
    auto d = parse_decision_token(decision->get<std::string>());
    if (!d) return std::nullopt;
    out.decision = *d;

    double u = 0.0;
    if (utility->is_number()) {
        u = utility->get<double>();
    } else if (utility->is_string()) {
        try {
            u = std::stod(utility->get<std::string>());
        } catch (const std::exception&) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (std::isnan(u)) return std::nullopt;
    if (u < 0.0 || u > 1.0) {
        spdlog::warn("utility {} for idea {} outside [0, 1]; clamped", u, idea_id);
        u = std::clamp(u, 0.0, 1.0);
    }
    out.utility = u;
    return out;
}

std::vector<ReviewCritique> generate_reviews(const IdeaProposal& idea, int n, Backend& reviewer,
                                             const ChatSettings& settings) {
    if (n < 1) throw UsageError("reviews_per_idea must be >= 1");
    std::vector<std::future<std::string>> pending;
    for (int i = 1; i <= n; ++i) {
        auto req = request(render_template(prompts::kReviewSystem,
                                           {{"index", std::to_string(i)},
                                            {"count", std::to_string(n)},
                                            {"persona", prompts::reviewer_persona(i)}}),
                           render_template(prompts::kReviewUser,
                                           {{"title", idea.title}, {"abstract", idea.abstract}}),
                           settings, ResponseFormat::free_text);
        pending.push_back(std::async(std::launch::async, [&reviewer, req] {
            auto text = trim(reviewer.chat_complete(req).text);
            if (text.empty()) throw ProtocolError("reviewer returned an empty critique");
            return text;
        }));
    }
    std::vector<ReviewCritique> out;
    std::vector<int> completed;
    std::string failure;
    for (int i = 1; i <= n; ++i) {
        try {
            out.push_back({idea.idea_id, i, pending[static_cast<std::size_t>(i - 1)].get()});
            completed.push_back(i);
        } catch (const std::exception& e) {
            if (failure.empty()) failure = "review " + std::to_string(i) + ": " + e.what();
        }
    }
    if (!failure.empty()) {
        std::string done;
        for (int c : completed) done += (done.empty() ? "" : ",") + std::to_string(c);
        throw PartialReviewError("reviews for " + idea.idea_id + " incomplete (completed [" + done +
                                     "]); " + failure,
                                 completed);
    }
    return out;
}

FilterDecision synthesize_decision(const IdeaProposal& idea,
                                   const std::vector<ReviewCritique>& reviews, Backend& decider,
                                   const ChatSettings& settings) {
    if (reviews.empty()) throw UsageError("decision synthesis needs at least one review");
    std::string block;
    for (const auto& r : reviews)
        block += "Review " + std::to_string(r.reviewer_index) + ": " + r.text + "\n";
    block.pop_back();
    auto req = request(std::string(prompts::kDecisionSystem),
                       render_template(prompts::kDecisionUser, {{"title", idea.title},
                                                                {"abstract", idea.abstract},
                                                                {"reviews", block}}),
                       settings, ResponseFormat::json_object);
    auto first = decider.chat_complete(req);
    if (auto d = parse_decision_response(first.text, idea.idea_id)) return *d;

    spdlog::info("decision reply for {} did not parse; retrying once", idea.idea_id);
    req.user_prompt += prompts::kJsonRepair;
    auto second = decider.chat_complete(req);
    if (auto d = parse_decision_response(second.text, idea.idea_id)) return *d;
    throw DecisionParseError("decision reply for " + idea.idea_id +
                             " lacks a valid ACCEPT/REJECT decision: " + prefix_of(second.text));
}

void to_json(json& j, const FilterConfig& c) { j = json{{"reviews_per_idea", c.reviews_per_idea}}; }

void from_json(const json& j, FilterConfig& c) {
    c.reviews_per_idea = j.value("reviews_per_idea", FilterConfig{}.reviews_per_idea);
}

void to_json(json& j, const FilterOutcome& o) {
    j = json{{"idea_id", o.idea_id},
             {"reviews", o.reviews},
             {"decision", o.decision ? json(*o.decision) : json(nullptr)},
             {"error", o.error ? json(*o.error) : json(nullptr)}};
}

void from_json(const json& j, FilterOutcome& o) {
    o.idea_id = j.at("idea_id").get<std::string>();
    o.reviews = j.at("reviews").get<std::vector<ReviewCritique>>();
    if (!j.at("decision").is_null()) o.decision = j["decision"].get<FilterDecision>();
    else o.decision.reset();
    if (!j.at("error").is_null()) o.error = j["error"].get<std::string>();
    else o.error.reset();
}

std::vector<FilterOutcome> filter_batch(const std::vector<IdeaProposal>& ideas,
                                        const FilterConfig& config, FilterRoles roles) {
    if (ideas.empty()) throw UsageError("filter_batch: no ideas given");
    if (config.reviews_per_idea < 1) throw UsageError("reviews_per_idea must be >= 1");

    std::vector<std::future<FilterOutcome>> pending;
    for (const auto& idea : ideas) {
        pending.push_back(std::async(std::launch::async, [&idea, &config, roles] {
            FilterOutcome out;
            out.idea_id = idea.idea_id;
            try {
                out.reviews = generate_reviews(idea, config.reviews_per_idea, roles.reviewer,
                                               roles.review);
                out.decision = synthesize_decision(idea, out.reviews, roles.decider, roles.decide);
            } catch (const std::exception& e) {
                spdlog::warn("filtering {} failed: {}", idea.idea_id, e.what());
                out.error = e.what();
            }
            return out;
        }));
    }
    std::vector<FilterOutcome> out;
    out.reserve(pending.size());
    for (auto& f : pending) out.push_back(f.get());
    return out;
}

}  // namespace spark
