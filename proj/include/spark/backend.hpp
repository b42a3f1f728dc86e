#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spark {

using json = nlohmann::json;

enum class ResponseFormat { free_text, json_object };

NLOHMANN_JSON_SERIALIZE_ENUM(ResponseFormat, {{ResponseFormat::free_text, "free_text"},
                                              {ResponseFormat::json_object, "json_object"}})

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
    ResponseFormat response_format = ResponseFormat::free_text;

    /// Throws UsageError when temperature < 0 or max_tokens < 1.
    void validate() const;
};

struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    std::string model_id;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim = 0;
    std::string model_id;

    EmbeddingVector() = default;
    EmbeddingVector(std::vector<double> v, std::string model)
        : values(std::move(v)), dim(values.size()), model_id(std::move(model)) {}

    /// length == dim, dim > 0, all values finite.
    bool valid() const;
};

void to_json(json& j, const EmbeddingVector& e);
void from_json(const json& j, EmbeddingVector& e);

inline constexpr std::size_t kDefaultEmbeddingDim = 1536;

struct BackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "SPARK_API_KEY";
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_cap{30000};
    int max_in_flight = 8;
    std::string chat_model = "gpt-4o-mini";
    std::string embedding_model = "text-embedding-3-large";
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    double temperature = 0.0;

    /// Throws UsageError when max_retries is outside [0, 10] or other fields
    /// are nonsensical.
    void validate() const;
};

void to_json(json& j, const BackendConfig& c);
void from_json(const json& j, BackendConfig& c);

/// Delays before retry 1..max_retries. delay_i = base*2^i + jitter_i with
/// jitter_i in [0, base*2^i), capped; the sequence is nondecreasing.
std::vector<std::chrono::milliseconds> backoff_schedule(const BackendConfig& config,
                                                        std::uint64_t seed);

/// Caps the number of concurrent in-flight requests.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int max_in_flight);

    void acquire();
    void release();
    int in_flight() const;
    int peak() const;

    class Guard {
    public:
        explicit Guard(ConcurrencyLimiter& l) : limiter_(l) { limiter_.acquire(); }
        ~Guard() { limiter_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        ConcurrencyLimiter& limiter_;
    };

private:
    int max_;
    int current_ = 0;
    int peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

/// Chat and embedding client. Implementations must be safe to call from
/// several threads at once.
class Backend {
public:
    virtual ~Backend() = default;

    ChatResponse chat_complete(const ChatRequest& req);

    /// Result has one vector per input, in input order, sharing dim and model.
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                             const std::string& model_id);

protected:
    virtual ChatResponse do_chat(const ChatRequest& req) = 0;
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts,
                                                  const std::string& model_id) = 0;
};

}  // namespace spark
