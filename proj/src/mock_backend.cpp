#include "spark/mock_backend.hpp"

#include <algorithm>
#include <cstdint>

#include "spark/error.hpp"
#include "spark/text.hpp"

namespace spark {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::vector<std::string> string_or_list(const json& j) {
    if (j.is_string()) return {j.get<std::string>()};
    return j.get<std::vector<std::string>>();
}

}  // namespace

bool MockEntry::matches(const ChatRequest& req) const {
    auto has = [&](const std::string& needle) {
        return req.system_prompt.find(needle) != std::string::npos ||
               req.user_prompt.find(needle) != std::string::npos;
    };
    return std::all_of(contains.begin(), contains.end(), has) &&
           std::none_of(excludes.begin(), excludes.end(), has);
}

void from_json(const json& j, MockEntry& e) {
    e.contains = j.contains("contains") ? string_or_list(j["contains"]) : std::vector<std::string>{};
    e.excludes = j.contains("excludes") ? string_or_list(j["excludes"]) : std::vector<std::string>{};
    const auto& r = j.at("response");
    e.response = r.is_string() ? r.get<std::string>() : r.dump();
}

void to_json(json& j, const MockEntry& e) {
    j = json{{"contains", e.contains}, {"excludes", e.excludes}, {"response", e.response}};
}

std::vector<double> hash_embedding(std::string_view text, std::size_t dim) {
    std::uint64_t state = fnv1a(text);
    std::vector<double> out(dim);
    for (auto& v : out) {
        // 53 random bits mapped onto [-1, 1]
        double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        v = 2.0 * unit - 1.0;
    }
    return out;
}

MockBackend::MockBackend(std::vector<MockEntry> script, std::size_t embedding_dim)
    : script_(std::move(script)), dim_(embedding_dim) {
    if (dim_ == 0) throw UsageError("mock embedding_dim must be positive");
}

std::vector<ChatRequest> MockBackend::chat_log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

std::size_t MockBackend::chat_calls() const {
    std::lock_guard lock(log_mutex_);
    return log_.size();
}

std::size_t MockBackend::embed_calls() const {
    std::lock_guard lock(log_mutex_);
    return embed_calls_;
}

ChatResponse MockBackend::do_chat(const ChatRequest& req) {
    {
        std::lock_guard lock(log_mutex_);
        log_.push_back(req);
    }
    for (const auto& entry : script_) {
        if (!entry.matches(req)) continue;
        ChatResponse out;
        out.text = entry.response;
        out.model_id = req.model_id.empty() ? "mock" : req.model_id;
        out.usage.prompt =
            static_cast<std::int64_t>((req.system_prompt.size() + req.user_prompt.size()) / 4);
        out.usage.completion = static_cast<std::int64_t>(entry.response.size() / 4);
        return out;
    }
    throw ScriptedMissError("no scripted response for prompt: " +
                            prefix_of(req.user_prompt.empty() ? req.system_prompt
                                                              : req.user_prompt));
}

std::vector<EmbeddingVector> MockBackend::do_embed(const std::vector<std::string>& texts,
                                                   const std::string& model_id) {
    {
        std::lock_guard lock(log_mutex_);
        ++embed_calls_;
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::string model = model_id.empty() ? "mock-embedding" : model_id;
    for (const auto& t : texts) out.emplace_back(hash_embedding(t, dim_), model);
    return out;
}

MockBackend mock_script(const std::vector<std::pair<std::string, std::string>>& entries,
                        std::size_t embedding_dim) {
    std::vector<MockEntry> script;
    script.reserve(entries.size());
    for (const auto& [matcher, response] : entries) script.push_back({{matcher}, {}, response});
    return MockBackend(std::move(script), embedding_dim);
}

}  // namespace spark
