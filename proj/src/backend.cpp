#include "spark/backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spark/error.hpp"

namespace spark {

void ChatRequest::validate() const {
    if (!(temperature >= 0.0)) throw UsageError("temperature must be >= 0");
    if (max_tokens < 1) throw UsageError("max_tokens must be >= 1");
}

bool EmbeddingVector::valid() const {
    if (dim == 0 || values.size() != dim) return false;
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void to_json(json& j, const EmbeddingVector& e) {
    j = json{{"values", e.values}, {"dim", e.dim}, {"model_id", e.model_id}};
}

void from_json(const json& j, EmbeddingVector& e) {
    e.values = j.at("values").get<std::vector<double>>();
    e.dim = j.at("dim").get<std::size_t>();
    e.model_id = j.value("model_id", "");
}

void BackendConfig::validate() const {
    if (max_retries < 0 || max_retries > 10)
        throw UsageError("max_retries must be in [0, 10], got " + std::to_string(max_retries));
    if (max_in_flight < 1) throw UsageError("max_in_flight must be >= 1");
    if (embedding_dim == 0) throw UsageError("embedding_dim must be positive");
    if (timeout.count() <= 0) throw UsageError("timeout must be positive");
    if (backoff_base.count() < 0) throw UsageError("backoff_base must be >= 0");
}

void to_json(json& j, const BackendConfig& c) {
    j = json{{"base_url", c.base_url},
             {"api_key_env", c.api_key_env},
             {"timeout_ms", c.timeout.count()},
             {"max_retries", c.max_retries},
             {"backoff_base_ms", c.backoff_base.count()},
             {"backoff_cap_ms", c.backoff_cap.count()},
             {"max_in_flight", c.max_in_flight},
             {"chat_model", c.chat_model},
             {"embedding_model", c.embedding_model},
             {"embedding_dim", c.embedding_dim},
             {"temperature", c.temperature}};
}

void from_json(const json& j, BackendConfig& c) {
    BackendConfig d;
    c.base_url = j.value("base_url", d.base_url);
    c.api_key_env = j.value("api_key_env", d.api_key_env);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", d.timeout.count()));
    c.max_retries = j.value("max_retries", d.max_retries);
    c.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", d.backoff_base.count()));
    c.backoff_cap = std::chrono::milliseconds(j.value("backoff_cap_ms", d.backoff_cap.count()));
    c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    c.chat_model = j.value("chat_model", d.chat_model);
    c.embedding_model = j.value("embedding_model", d.embedding_model);
    c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    c.temperature = j.value("temperature", d.temperature);
}

std::vector<std::chrono::milliseconds> backoff_schedule(const BackendConfig& config,
                                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::chrono::milliseconds> out;
    const auto base = config.backoff_base.count();
    const auto cap = config.backoff_cap.count();
    for (int i = 0; i < config.max_retries; ++i) {
        long long step = base << i;
        long long jitter = 0;
        if (step > 0) jitter = std::uniform_int_distribution<long long>(0, step - 1)(rng);
        out.emplace_back(std::min<long long>(cap, step + jitter));
    }
    return out;
}

ConcurrencyLimiter::ConcurrencyLimiter(int max_in_flight) : max_(std::max(1, max_in_flight)) {}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return current_ < max_; });
    ++current_;
    peak_ = std::max(peak_, current_);
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --current_;
    }
    cv_.notify_one();
}

int ConcurrencyLimiter::in_flight() const {
    std::lock_guard lock(mutex_);
    return current_;
}

int ConcurrencyLimiter::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

ChatResponse Backend::chat_complete(const ChatRequest& req) {
    req.validate();
    return do_chat(req);
}

std::vector<EmbeddingVector> Backend::embed_texts(const std::vector<std::string>& texts,
                                                  const std::string& model_id) {
    if (texts.empty()) throw UsageError("embed_texts: empty input list");
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (texts[i].empty()) throw UsageError("embed_texts: empty text at position " +
                                               std::to_string(i));
    auto out = do_embed(texts, model_id);
    if (out.size() != texts.size())
        throw ProtocolError("embedding count " + std::to_string(out.size()) +
                            " does not match input count " + std::to_string(texts.size()));
    for (const auto& v : out) {
        if (!v.valid()) throw ProtocolError("embedding vector is empty or non-finite");
        if (v.dim != out.front().dim)
            throw ProtocolError("embedding dimension mismatch within batch: " +
                                std::to_string(v.dim) + " vs " +
                                std::to_string(out.front().dim));
    }
    return out;
}

}  // namespace spark
