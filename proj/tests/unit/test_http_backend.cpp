#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "kfvqa/errors.hpp"
#include "kfvqa/http_backend.hpp"

using namespace kfvqa;
using nlohmann::json;

namespace {

struct TestServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> chat_hits{0};

    explicit TestServer(bool with_logprobs) {
        server.Post("/v1/chat/completions", [this, with_logprobs](const httplib::Request& req,
                                                                  httplib::Response& res) {
            chat_hits.fetch_add(1);
            const json body = json::parse(req.body);
            CHECK(body["temperature"].get<double>() == 0.0);
            json choice{{"message", {{"role", "assistant"}, {"content", "because"}}}};
            if (with_logprobs && body.value("logprobs", false)) {
                choice["logprobs"] = {{"content", json::array({json{{"token", "because"},
                                                                    {"logprob", -0.1}}})}};
            }
            res.set_content(json{{"choices", json::array({choice})}}.dump(), "application/json");
        });
        server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(
                json{{"data", json::array({json{{"embedding", {0.5, -0.5, 1.0}}}})}}.dump(),
                "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

ChatRequest chat_request(bool want_logprobs) {
    ChatRequest request;
    request.model = "test-model";
    request.prompt = "Q: Why?";
    request.want_logprobs = want_logprobs;
    return request;
}

}  // namespace

TEST_SUITE("http_backend") {

TEST_CASE("chat completion with token logprobs") {
    TestServer server(true);
    HttpBackendConfig config;
    config.base_url = server.url();
    HttpBackend backend(config);
    const Completion c = backend.complete(chat_request(true));
    CHECK(c.text == "because");
    REQUIRE(c.tokens.size() == 1);
    CHECK(c.token_logprobs[0] == -0.1);
    CHECK(backend.transport_calls() == 1);
}

TEST_CASE("missing logprobs is a hard error when requested") {
    TestServer server(false);
    HttpBackendConfig config;
    config.base_url = server.url();
    HttpBackend backend(config);
    CHECK_THROWS_WITH_AS(backend.complete(chat_request(true)),
                         doctest::Contains("LogprobsMissing"), Error);
    CHECK_NOTHROW(backend.complete(chat_request(false)));
}

TEST_CASE("embedding endpoint round trip") {
    TestServer server(true);
    HttpBackendConfig config;
    config.base_url = server.url();
    HttpBackend backend(config);
    const Embedding e = backend.embed(EmbedRequest{"embedder", "autumn"});
    CHECK(e.dim == 3);
    CHECK(e.vector == std::vector<float>{0.5f, -0.5f, 1.0f});
}

TEST_CASE("unreachable backend fails after the fixed retry count") {
    HttpBackendConfig config;
    config.base_url = "http://127.0.0.1:1";  // nothing listens here
    config.retries = 2;
    config.timeout_seconds = 1;
    HttpBackend backend(config);
    CHECK_THROWS_WITH_AS(backend.complete(chat_request(false)),
                         doctest::Contains("BackendUnreachable"), Error);
    CHECK(backend.transport_calls() == 3);  // initial try + 2 retries
}

}  // TEST_SUITE
