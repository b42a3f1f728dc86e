#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "spark/backend.hpp"

namespace spark {

/// One scripted reply. A request matches when every `contains` string occurs
/// in the system or user prompt and no `excludes` string does.
struct MockEntry {
    std::vector<std::string> contains;
    std::vector<std::string> excludes;
    std::string response;

    bool matches(const ChatRequest& req) const;
};

void from_json(const json& j, MockEntry& e);
void to_json(json& j, const MockEntry& e);

/// Deterministic backend. Chat replies come from the script (first matching
/// entry wins); embeddings are a stable hash of the text expanded to
/// `embedding_dim` values in [-1, 1]. Replies depend only on (script, request).
class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<MockEntry> script,
                         std::size_t embedding_dim = kDefaultEmbeddingDim);

    /// Every chat request seen, in call order.
    std::vector<ChatRequest> chat_log() const;
    std::size_t chat_calls() const;
    std::size_t embed_calls() const;

    std::size_t embedding_dim() const { return dim_; }

protected:
    ChatResponse do_chat(const ChatRequest& req) override;
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts,
                                          const std::string& model_id) override;

private:
    std::vector<MockEntry> script_;
    std::size_t dim_;
    mutable std::mutex log_mutex_;
    std::vector<ChatRequest> log_;
    std::size_t embed_calls_ = 0;
};

/// Builds a mock from a list of (matcher, response) pairs, where each matcher
/// is a single required substring.
MockBackend mock_script(const std::vector<std::pair<std::string, std::string>>& entries,
                        std::size_t embedding_dim = kDefaultEmbeddingDim);

/// The hash embedding used by MockBackend.
std::vector<double> hash_embedding(std::string_view text, std::size_t dim);

}  // namespace spark
