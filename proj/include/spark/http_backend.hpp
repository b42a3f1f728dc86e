#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spark/backend.hpp"

namespace spark {

struct HttpReply {
    int status = 0;
    std::string body;
};

/// Raised by a Transport when no HTTP status was obtained.
class TransportFailure : public std::runtime_error {
public:
    TransportFailure(const std::string& what, bool timed_out)
        : std::runtime_error(what), timed_out_(timed_out) {}
    bool timed_out() const noexcept { return timed_out_; }

private:
    bool timed_out_;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpReply post(const std::string& url, const HeaderList& headers,
                           const std::string& body, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport; supports http:// and https:// URLs.
class HttplibTransport : public Transport {
public:
    HttpReply post(const std::string& url, const HeaderList& headers, const std::string& body,
                   std::chrono::milliseconds timeout) override;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// OpenAI-compatible client for /chat/completions and /embeddings.
///
/// Transport failures, HTTP 429 and 5xx are retried up to max_retries times
/// with exponential backoff; other 4xx statuses fail immediately with
/// HttpStatusError. The API key is read once from the environment variable
/// named by BackendConfig::api_key_env.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config,
                         std::shared_ptr<Transport> transport = std::make_shared<HttplibTransport>(),
                         Sleeper sleeper = {}, std::uint64_t jitter_seed = 0x5eed);

    const BackendConfig& config() const { return config_; }
    const ConcurrencyLimiter& limiter() const { return limiter_; }

    /// Sends `body` to base_url + path with retries; returns the parsed reply.
    json post_json(const std::string& path, const json& body);

protected:
    ChatResponse do_chat(const ChatRequest& req) override;
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts,
                                          const std::string& model_id) override;

private:
    BackendConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    std::uint64_t seed_;
    std::atomic<std::uint64_t> request_counter_{0};
    std::string api_key_;
    ConcurrencyLimiter limiter_;
};

}  // namespace spark
