#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include "spark/error.hpp"
#include "spark/http_backend.hpp"
#include "spark/mock_backend.hpp"

using namespace spark;
using namespace std::chrono_literals;

namespace {

/// Replays a queue of outcomes: an HttpReply, or a transport failure.
class ScriptedTransport : public Transport {
public:
    struct Step {
        std::optional<HttpReply> reply;
        bool timed_out = false;
    };

    explicit ScriptedTransport(std::deque<Step> steps) : steps_(std::move(steps)) {}
    ScriptedTransport(std::deque<Step> steps, Step fallback)
        : steps_(std::move(steps)), fallback_(std::move(fallback)) {}

    HttpReply post(const std::string& url, const HeaderList& headers, const std::string& body,
                   std::chrono::milliseconds) override {
        Step step;
        {
            std::lock_guard lock(mutex_);
            ++attempts;
            last_url = url;
            last_headers = headers;
            last_body = json::parse(body);
            if (steps_.empty()) {
                step = fallback_;
            } else {
                step = steps_.front();
                steps_.pop_front();
            }
        }
        if (!step.reply) throw TransportFailure("connection refused", step.timed_out);
        return *step.reply;
    }

    std::atomic<int> attempts{0};
    std::string last_url;
    HeaderList last_headers;
    json last_body;

private:
    std::mutex mutex_;
    std::deque<Step> steps_;
    Step fallback_;
};

/// Counts calls and forwards them to a real transport.
class CountingTransport : public Transport {
public:
    HttpReply post(const std::string& url, const HeaderList& headers, const std::string& body,
                   std::chrono::milliseconds timeout) override {
        ++attempts;
        return inner_.post(url, headers, body, timeout);
    }
    std::atomic<int> attempts{0};

private:
    HttplibTransport inner_;
};

HttpReply ok_chat(const std::string& text) {
    json j{{"model", "m"},
           {"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})},
           {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 2}}}};
    return {200, j.dump()};
}

ChatRequest simple_request(const std::string& user = "P") {
    ChatRequest r;
    r.system_prompt = "sys";
    r.user_prompt = user;
    return r;
}

BackendConfig quick_config(int retries) {
    BackendConfig c;
    c.base_url = "http://fake.invalid/v1";
    c.max_retries = retries;
    c.backoff_base = 1ms;
    c.backoff_cap = 5ms;
    return c;
}

const Sleeper kNoSleep = [](std::chrono::milliseconds) {};

}  // namespace

TEST(MockBackend, ScriptedEcho) {
    auto mock = mock_script({{"P", "OK"}});
    EXPECT_EQ(mock.chat_complete(simple_request("P")).text, "OK");
}

TEST(MockBackend, EmptyScriptMisses) {
    MockBackend mock({});
    EXPECT_THROW(mock.chat_complete(simple_request("anything")), ScriptedMissError);
}

TEST(MockBackend, FirstRegisteredMatcherWins) {
    auto mock = mock_script({{"apple", "first"}, {"apple pie", "second"}});
    EXPECT_EQ(mock.chat_complete(simple_request("apple pie please")).text, "first");
}

TEST(MockBackend, ExcludesSkipEntry) {
    std::vector<MockEntry> script{{{"score"}, {"Return only valid JSON"}, "garbage"},
                                  {{"score"}, {}, "{\"relevance\": 3}"}};
    MockBackend mock(script);
    EXPECT_EQ(mock.chat_complete(simple_request("score it")).text, "garbage");
    EXPECT_EQ(mock.chat_complete(simple_request("score it\nReturn only valid JSON.")).text,
              "{\"relevance\": 3}");
}

TEST(MockBackend, IdenticalRequestsIdenticalReplies) {
    auto mock = mock_script({{"P", "reply"}});
    auto a = mock.chat_complete(simple_request());
    auto b = mock.chat_complete(simple_request());
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(mock.chat_calls(), 2u);
}

TEST(MockBackend, EmbeddingDefaultsTo1536) {
    MockBackend mock({});
    auto v = mock.embed_texts({"a"}, "emb");
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].dim, 1536u);
    EXPECT_EQ(v[0].values.size(), 1536u);
    EXPECT_TRUE(v[0].valid());
}

TEST(MockBackend, EmbeddingIsDeterministicAndOrdered) {
    MockBackend mock({}, 32);
    auto twice = mock.embed_texts({"same", "same"}, "emb");
    EXPECT_EQ(twice[0].values, twice[1].values);

    auto batch = mock.embed_texts({"x", "y", "z"}, "emb");
    ASSERT_EQ(batch.size(), 3u);
    const char* texts[] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i)
        EXPECT_EQ(batch[i].values, mock.embed_texts({texts[i]}, "emb")[0].values) << texts[i];
    EXPECT_NE(batch[0].values, batch[1].values);
}

TEST(MockBackend, EmbedRejectsEmptyInput) {
    MockBackend mock({});
    EXPECT_THROW(mock.embed_texts({}, "emb"), UsageError);
}

TEST(Backoff, NondecreasingAndCapped) {
    BackendConfig c;
    c.max_retries = 10;
    c.backoff_base = 100ms;
    c.backoff_cap = 20000ms;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto d = backoff_schedule(c, seed);
        ASSERT_EQ(d.size(), 10u);
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto floor = std::min<long long>(100LL << i, 20000);
            EXPECT_GE(d[i].count(), floor);
            EXPECT_LE(d[i].count(), 20000);
            if (i > 0) {
                EXPECT_GE(d[i], d[i - 1]);
            }
        }
    }
}

TEST(HttpBackend, RetriesExhaustedAfterMaxRetriesPlusOne) {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{});
    HttpBackend backend(quick_config(2), transport, kNoSleep);
    try {
        backend.chat_complete(simple_request());
        FAIL() << "expected RetriesExhaustedError";
    } catch (const RetriesExhaustedError& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(transport->attempts, 3);
}

TEST(HttpBackend, UnreachableHostCountsThreeAttempts) {
    auto transport = std::make_shared<CountingTransport>();
    auto config = quick_config(2);
    config.base_url = "http://127.0.0.1:9/v1";
    config.timeout = 500ms;
    HttpBackend backend(config, transport, kNoSleep);
    EXPECT_THROW(backend.chat_complete(simple_request()), BackendError);
    EXPECT_EQ(transport->attempts, 3);
}

TEST(HttpBackend, ClientErrorIsPermanent) {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{{HttpReply{400, "{\"error\":\"bad model\"}"}}});
    HttpBackend backend(quick_config(3), transport, kNoSleep);
    try {
        backend.chat_complete(simple_request());
        FAIL() << "expected HttpStatusError";
    } catch (const HttpStatusError& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_NE(e.body().find("bad model"), std::string::npos);
    }
    EXPECT_EQ(transport->attempts, 1);
}

TEST(HttpBackend, RetriesRateLimitThenSucceeds) {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{
        {HttpReply{429, "slow down"}}, {HttpReply{503, "busy"}}, {ok_chat("fine")}});
    std::vector<std::chrono::milliseconds> slept;
    HttpBackend backend(quick_config(3), transport,
                        [&](std::chrono::milliseconds d) { slept.push_back(d); });
    auto r = backend.chat_complete(simple_request());
    EXPECT_EQ(r.text, "fine");
    EXPECT_EQ(r.usage.prompt, 5);
    EXPECT_EQ(transport->attempts, 3);
    ASSERT_EQ(slept.size(), 2u);
    EXPECT_LE(slept[0], slept[1]);
}

TEST(HttpBackend, TimeoutsSurfaceAsTimeoutError) {
    ScriptedTransport::Step timeout{std::nullopt, true};
    auto transport =
        std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{}, timeout);
    HttpBackend backend(quick_config(1), transport, kNoSleep);
    EXPECT_THROW(backend.chat_complete(simple_request()), TimeoutError);
    EXPECT_EQ(transport->attempts, 2);
}

TEST(HttpBackend, ChatWireFormat) {
    ::setenv("SPARK_TEST_KEY", "sk-test", 1);
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{{ok_chat("{\"a\":1}")}});
    auto config = quick_config(0);
    config.api_key_env = "SPARK_TEST_KEY";
    HttpBackend backend(config, transport, kNoSleep);
    auto req = simple_request("hello");
    req.model_id = "wintermute-tiny";
    req.response_format = ResponseFormat::json_object;
    backend.chat_complete(req);

    EXPECT_EQ(transport->last_url, "http://fake.invalid/v1/chat/completions");
    const auto& body = transport->last_body;
    EXPECT_EQ(body["model"], "wintermute-tiny");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"], "hello");
    EXPECT_EQ(body["response_format"]["type"], "json_object");
    bool auth = false;
    for (const auto& [k, v] : transport->last_headers)
        if (k == "Authorization") auth = v == "Bearer sk-test";
    EXPECT_TRUE(auth);
    ::unsetenv("SPARK_TEST_KEY");
}

TEST(HttpBackend, EmptyContentIsProtocolError) {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{{ok_chat("")}});
    HttpBackend backend(quick_config(0), transport, kNoSleep);
    EXPECT_THROW(backend.chat_complete(simple_request()), ProtocolError);
}

TEST(HttpBackend, EmbeddingsSortedByIndex) {
    auto config = quick_config(0);
    config.embedding_dim = 2;
    json reply{{"model", "emb"},
               {"data", json::array({{{"index", 1}, {"embedding", {0.0, 1.0}}},
                                     {{"index", 0}, {"embedding", {1.0, 0.0}}}})}};
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{{HttpReply{200, reply.dump()}}});
    HttpBackend backend(config, transport, kNoSleep);
    auto v = backend.embed_texts({"first", "second"}, "emb");
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[0].values, (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(transport->last_body["dimensions"], 2);
}

TEST(HttpBackend, EmbeddingDimensionMismatchIsProtocolError) {
    auto config = quick_config(0);
    config.embedding_dim = 3;
    json reply{{"data", json::array({{{"index", 0}, {"embedding", {1.0, 0.0}}}})}};
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{{HttpReply{200, reply.dump()}}});
    HttpBackend backend(config, transport, kNoSleep);
    EXPECT_THROW(backend.embed_texts({"a"}, "emb"), ProtocolError);
}

TEST(HttpBackend, LimiterBoundsInFlightRequests) {
    class SlowTransport : public Transport {
    public:
        HttpReply post(const std::string&, const HeaderList&, const std::string&,
                       std::chrono::milliseconds) override {
            std::this_thread::sleep_for(5ms);
            return ok_chat("x");
        }
    };
    auto config = quick_config(0);
    config.max_in_flight = 2;
    HttpBackend backend(config, std::make_shared<SlowTransport>(), kNoSleep);
    std::vector<std::future<ChatResponse>> calls;
    for (int i = 0; i < 8; ++i)
        calls.push_back(std::async(std::launch::async, [&] { return backend.chat_complete(simple_request()); }));
    for (auto& f : calls) EXPECT_EQ(f.get().text, "x");
    EXPECT_LE(backend.limiter().peak(), 2);
    EXPECT_GE(backend.limiter().peak(), 1);
}

TEST(BackendConfig, RejectsTooManyRetries) {
    BackendConfig c;
    c.max_retries = 11;
    EXPECT_THROW(c.validate(), UsageError);
}

TEST(ChatRequest, ValidatesSampling) {
    auto r = simple_request();
    r.max_tokens = 0;
    MockBackend mock({});
    EXPECT_THROW(mock.chat_complete(r), UsageError);
}
