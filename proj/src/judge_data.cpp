#include "spark/judge_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <regex>

#include <spdlog/spdlog.h>

#include "spark/prompts.hpp"

namespace spark {

namespace {

json optional_json(const auto& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<T>();
}

std::optional<std::string> text_field(const json& j, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
        if (j.contains(k) && j[k].is_string()) {
            auto v = trim(j[k].get<std::string>());
            if (!v.empty()) return v;
        }
    return std::nullopt;
}

std::string id_field(const json& j) {
    for (const char* k : {"submission_id", "id", "forum"}) {
        if (!j.contains(k)) continue;
        if (j[k].is_string()) return j[k].get<std::string>();
        if (j[k].is_number_integer()) return std::to_string(j[k].get<long long>());
    }
    return {};
}

}  // namespace

void to_json(json& j, const AbstractReviewPair& p) {
    j = json{{"pair_id", p.pair_id},
             {"submission_id", p.submission_id},
             {"a_orig", p.a_orig},
             {"r_orig", p.r_orig},
             {"a_idea", optional_json(p.a_idea)},
             {"r_idea", optional_json(p.r_idea)},
             {"venue", p.venue},
             {"submission_date", optional_json(p.submission_date)},
             {"review_score", optional_json(p.review_score)},
             {"idea_flagged", p.idea_flagged}};
}

void from_json(const json& j, AbstractReviewPair& p) {
    p.pair_id = j.at("pair_id").get<std::string>();
    p.submission_id = j.value("submission_id", "");
    p.a_orig = j.at("a_orig").get<std::string>();
    p.r_orig = j.at("r_orig").get<std::string>();
    p.a_idea = optional_field<std::string>(j, "a_idea");
    p.r_idea = optional_field<std::string>(j, "r_idea");
    p.venue = j.value("venue", "");
    p.submission_date = optional_field<Date>(j, "submission_date");
    p.review_score = optional_field<double>(j, "review_score");
    p.idea_flagged = j.value("idea_flagged", false);
}

void to_json(json& j, const ExtractReport& r) {
    j = json{{"pairs", r.pairs.size()},
             {"records_read", r.records_read},
             {"malformed_lines", r.malformed_lines},
             {"missing_abstract", r.missing_abstract},
             {"missing_review", r.missing_review}};
}

std::optional<double> parse_review_score(const json& field) {
    if (field.is_number()) return field.get<double>();
    if (!field.is_string()) return std::nullopt;
    static const std::regex leading(R"(^\s*([-+]?\d+(?:\.\d+)?))");
    std::smatch m;
    const auto s = field.get<std::string>();
    if (std::regex_search(s, m, leading)) return std::stod(m[1].str());
    return std::nullopt;
}

ExtractReport extract_pairs(const std::filesystem::path& dump_path) {
    std::ifstream in(dump_path, std::ios::binary);
    if (!in) throw IngestionError("cannot read dump " + dump_path.string());

    ExtractReport report;
    std::map<std::string, int> reviews_seen;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++report.records_read;
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            ++report.malformed_lines;
            continue;
        }
        auto abstract = text_field(rec, {"abstract"});
        if (!abstract) {
            ++report.missing_abstract;
            continue;
        }

        struct RawReview {
            std::string text;
            std::optional<double> score;
        };
        std::vector<RawReview> reviews;
        auto score_of = [](const json& obj) -> std::optional<double> {
            for (const char* k : {"rating", "score", "review_score"})
                if (obj.contains(k))
                    if (auto s = parse_review_score(obj[k])) return s;
            return std::nullopt;
        };
        if (auto text = text_field(rec, {"review_text", "review"})) {
            reviews.push_back({*text, score_of(rec)});
        } else if (rec.contains("reviews") && rec["reviews"].is_array()) {
            for (const auto& r : rec["reviews"]) {
                if (r.is_string() && !trim(r.get<std::string>()).empty())
                    reviews.push_back({trim(r.get<std::string>()), std::nullopt});
                else if (r.is_object())
                    if (auto text = text_field(r, {"review_text", "review", "text"}))
                        reviews.push_back({*text, score_of(r)});
            }
        }
        if (reviews.empty()) {
            ++report.missing_review;
            continue;
        }

        std::string submission = id_field(rec);
        if (submission.empty()) submission = "sub_" + sha256_hex(*abstract).substr(0, 12);
        std::optional<Date> date;
        for (const char* k : {"date", "submission_date", "cdate"})
            if (rec.contains(k) && rec[k].is_string())
                if ((date = parse_date(rec[k].get<std::string>()))) break;

        for (auto& r : reviews) {
            AbstractReviewPair p;
            p.submission_id = submission;
            p.pair_id = submission + "#r" + std::to_string(++reviews_seen[submission]);
            p.a_orig = *abstract;
            p.r_orig = std::move(r.text);
            p.venue = rec.value("venue", "");
            p.submission_date = date;
            p.review_score = r.score;
            report.pairs.push_back(std::move(p));
        }
    }
    spdlog::info("extracted {} pairs from {} records ({} skipped)", report.pairs.size(),
                 report.records_read, report.skipped());
    return report;
}

std::vector<std::string> results_leak_violations(const std::string& text) {
    struct Rule {
        const char* name;
        std::regex pattern;
    };
    static const std::vector<Rule> rules = [] {
        auto ic = std::regex::ECMAScript | std::regex::icase;
        return std::vector<Rule>{
            {"percent sign", std::regex("%", ic)},
            {"number with percent", std::regex(R"(\d\s*(%|percent\b))", ic)},
            {"state-of-the-art claim", std::regex(R"(state[- ]of[- ]the[- ]art|\bsota\b)", ic)},
            {"outperform claim", std::regex(R"(outperform)", ic)},
            {"table or figure reference", std::regex(R"(\b(table|fig\.?|figure)\s*\d)", ic)},
        };
    }();
    std::vector<std::string> out;
    for (const auto& r : rules)
        if (std::regex_search(text, r.pattern)) out.emplace_back(r.name);
    return out;
}

namespace {

TransformResult run_transform(std::string_view user_template, const std::string& source,
                              Backend& annotator, const ChatSettings& settings) {
    if (trim(source).empty()) throw UsageError("transform input is empty");
    ChatRequest req;
    req.system_prompt = std::string(prompts::kAnnotatorSystem);
    req.user_prompt = render_template(user_template, {{"text", source}});
    req.model_id = settings.model_id;
    req.temperature = settings.temperature;
    req.max_tokens = settings.max_tokens;

    TransformResult out;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        out.attempts = attempt;
        auto text = trim(annotator.chat_complete(req).text);
        if (text.empty()) throw TransformError("annotator returned empty output");
        out.violations = results_leak_violations(text);
        if (out.violations.empty()) {
            out.text = std::move(text);
            return out;
        }
        req.user_prompt += prompts::kRegenerate;
    }
    out.flagged = true;
    return out;
}

}  // namespace

TransformResult transform_to_idea_abstract(const std::string& a_orig, Backend& annotator,
                                           const ChatSettings& settings) {
    return run_transform(prompts::kIdeaAbstractUser, a_orig, annotator, settings);
}

TransformResult transform_to_idea_review(const std::string& r_orig, Backend& annotator,
                                         const ChatSettings& settings) {
    return run_transform(prompts::kIdeaReviewUser, r_orig, annotator, settings);
}

void annotate_pairs(std::vector<AbstractReviewPair>& pairs, Backend& annotator,
                    const ChatSettings& settings) {
    // one abstract rewrite per distinct abstract; pairs of a submission share it
    std::map<std::string, std::shared_future<TransformResult>> abstracts;
    std::vector<std::future<TransformResult>> reviews;
    for (const auto& p : pairs) {
        if (!abstracts.count(p.a_orig))
            abstracts.emplace(p.a_orig, std::async(std::launch::async, [&, text = p.a_orig] {
                                  return transform_to_idea_abstract(text, annotator, settings);
                              }).share());
        reviews.push_back(std::async(std::launch::async, [&, text = p.r_orig] {
            return transform_to_idea_review(text, annotator, settings);
        }));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& p = pairs[i];
        auto a = abstracts.at(p.a_orig).get();
        auto r = reviews[i].get();
        p.a_idea = a.text;
        p.r_idea = r.text;
        p.idea_flagged = a.flagged || r.flagged;
        if (p.idea_flagged)
            spdlog::warn("pair {} flagged by the results-leak screen", p.pair_id);
    }
}

std::string_view system_prompt_for(TaskKind task) {
    switch (task) {
        case TaskKind::orig_review_pred: return prompts::kTaskOrigReview;
        case TaskKind::idea_review_pred: return prompts::kTaskIdeaReview;
        case TaskKind::orig_abstract_gen: return prompts::kTaskOrigAbstract;
        case TaskKind::idea_abstract_gen: return prompts::kTaskIdeaAbstract;
    }
    return {};
}

void to_json(json& j, const TrainingRecord& r) {
    j = json{{"task", r.task},
             {"system_prompt", r.system_prompt},
             {"input", r.input},
             {"target", r.target},
             {"pair_id", r.pair_id},
             {"submission_date", optional_json(r.submission_date)}};
}

void from_json(const json& j, TrainingRecord& r) {
    r.task = j.at("task").get<TaskKind>();
    r.system_prompt = j.at("system_prompt").get<std::string>();
    r.input = j.at("input").get<std::string>();
    r.target = j.at("target").get<std::string>();
    r.pair_id = j.at("pair_id").get<std::string>();
    r.submission_date = optional_field<Date>(j, "submission_date");
}

std::vector<TrainingRecord> build_training_records(const std::vector<AbstractReviewPair>& pairs) {
    std::vector<TrainingRecord> out;
    auto emit = [&](TaskKind task, const std::string& input, const std::string& target,
                    const AbstractReviewPair& p) {
        out.push_back({task, std::string(system_prompt_for(task)), input, target, p.pair_id,
                       p.submission_date});
    };
    for (const auto& p : pairs) {
        emit(TaskKind::orig_review_pred, p.a_orig, p.r_orig, p);
        emit(TaskKind::orig_abstract_gen, p.r_orig, p.a_orig, p);
        if (p.has_idea_fields() && !p.idea_flagged) {
            emit(TaskKind::idea_review_pred, *p.a_idea, *p.r_idea, p);
            emit(TaskKind::idea_abstract_gen, *p.r_idea, *p.a_idea, p);
        }
    }
    return out;
}

SplitResult temporal_split(const std::vector<TrainingRecord>& records, const Date& cutoff) {
    std::map<std::string, Date> latest;
    for (const auto& r : records) {
        if (!r.submission_date) throw SplitError("record for pair " + r.pair_id + " has no date");
        auto [it, inserted] = latest.emplace(r.pair_id, *r.submission_date);
        if (!inserted && it->second < *r.submission_date) it->second = *r.submission_date;
    }
    SplitResult out;
    for (const auto& r : records)
        (latest.at(r.pair_id) <= cutoff ? out.train : out.test).push_back(r);
    return out;
}

double score_rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size())
        throw UsageError("score_rmse: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(actual.size()) + " actual scores");
    if (predicted.empty()) throw UsageError("score_rmse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        double d = predicted[i] - actual[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

std::vector<double> load_scores(const std::filesystem::path& path) {
    std::vector<double> out;
    std::size_t row = 0;
    for (const auto& j : read_jsonl(path)) {
        ++row;
        std::optional<double> v;
        if (j.is_number()) v = j.get<double>();
        else if (j.is_object())
            for (const char* k : {"score", "review_score"})
                if (j.contains(k) && j[k].is_number()) {
                    v = j[k].get<double>();
                    break;
                }
        if (!v) throw ParseError(path.string() + ": record " + std::to_string(row) + " has no score");
        out.push_back(*v);
    }
    return out;
}

}  // namespace spark
