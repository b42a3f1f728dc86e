#include "spark/http_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "spark/error.hpp"
#include "spark/text.hpp"

namespace spark {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw UsageError("invalid URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retriable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpReply HttplibTransport::post(const std::string& url, const HeaderList& headers,
                                 const std::string& body, std::chrono::milliseconds timeout) {
    auto parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(parts.path, h, body, "application/json");
    if (!res) {
        auto err = res.error();
        bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                         err == httplib::Error::Write;
        throw TransportFailure("transport error: " + httplib::to_string(err), timed_out);
    }
    return {res->status, res->body};
}

HttpBackend::HttpBackend(BackendConfig config, std::shared_ptr<Transport> transport,
                         Sleeper sleeper, std::uint64_t jitter_seed)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      seed_(jitter_seed),
      limiter_(config_.max_in_flight) {
    config_.validate();
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    if (api_key_.empty())
        spdlog::warn("environment variable {} is unset; requests go out unauthenticated",
                     config_.api_key_env);
    while (!config_.base_url.empty() && config_.base_url.back() == '/') config_.base_url.pop_back();
}

json HttpBackend::post_json(const std::string& path, const json& body) {
    const std::string url = config_.base_url + path;
    const std::string payload = body.dump();
    HeaderList headers{{"Content-Type", "application/json"}};
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    spdlog::debug("POST {} (Authorization: Bearer ***) body={}", url, payload);

    auto delays = backoff_schedule(config_, seed_ + request_counter_.fetch_add(1));
    std::string last_failure;
    bool last_timed_out = false;
    const int attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        try {
            HttpReply reply;
            {
                ConcurrencyLimiter::Guard guard(limiter_);
                reply = transport_->post(url, headers, payload, config_.timeout);
            }
            spdlog::debug("reply {} from {}: {}", reply.status, url, reply.body);
            if (reply.status >= 200 && reply.status < 300) {
                auto parsed = json::parse(reply.body, nullptr, false);
                if (parsed.is_discarded() || !parsed.is_object())
                    throw ProtocolError("response from " + url + " is not a JSON object");
                return parsed;
            }
            if (!retriable_status(reply.status)) throw HttpStatusError(reply.status, reply.body);
            last_failure = "HTTP " + std::to_string(reply.status);
            last_timed_out = false;
        } catch (const TransportFailure& e) {
            last_failure = e.what();
            last_timed_out = e.timed_out();
        }
        if (attempt + 1 < attempts) {
            spdlog::warn("attempt {}/{} to {} failed ({}); retrying", attempt + 1, attempts, url,
                         last_failure);
            sleeper_(delays[static_cast<std::size_t>(attempt)]);
        }
    }
    if (last_timed_out)
        throw TimeoutError("request to " + url + " timed out after " + std::to_string(attempts) +
                           " attempts");
    throw RetriesExhaustedError(attempts, last_failure);
}

ChatResponse HttpBackend::do_chat(const ChatRequest& req) {
    json messages = json::array();
    if (!req.system_prompt.empty())
        messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
    const std::string model = req.model_id.empty() ? config_.chat_model : req.model_id;
    json body{{"model", model},
              {"messages", messages},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
    if (req.response_format == ResponseFormat::json_object)
        body["response_format"] = {{"type", "json_object"}};

    auto reply = post_json("/chat/completions", body);
    try {
        ChatResponse out;
        const auto& message = reply.at("choices").at(0).at("message");
        if (message.contains("content") && message["content"].is_string())
            out.text = message["content"].get<std::string>();
        if (out.text.empty()) throw ProtocolError("chat completion returned empty content");
        if (reply.contains("usage")) {
            out.usage.prompt = reply["usage"].value("prompt_tokens", 0);
            out.usage.completion = reply["usage"].value("completion_tokens", 0);
        }
        out.model_id = reply.value("model", model);
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed chat completion: ") + e.what());
    }
}

std::vector<EmbeddingVector> HttpBackend::do_embed(const std::vector<std::string>& texts,
                                                   const std::string& model_id) {
    const std::string model = model_id.empty() ? config_.embedding_model : model_id;
    json body{{"model", model}, {"input", texts}, {"dimensions", config_.embedding_dim}};
    auto reply = post_json("/embeddings", body);
    try {
        std::vector<std::pair<std::size_t, EmbeddingVector>> indexed;
        for (const auto& item : reply.at("data")) {
            auto values = item.at("embedding").get<std::vector<double>>();
            if (values.size() != config_.embedding_dim)
                throw ProtocolError("embedding dimension " + std::to_string(values.size()) +
                                    " does not match configured " +
                                    std::to_string(config_.embedding_dim));
            indexed.emplace_back(item.value("index", indexed.size()),
                                 EmbeddingVector(std::move(values), reply.value("model", model)));
        }
        std::sort(indexed.begin(), indexed.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<EmbeddingVector> out;
        for (auto& [_, v] : indexed) out.push_back(std::move(v));
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed embeddings response: ") + e.what());
    }
}

}  // namespace spark
