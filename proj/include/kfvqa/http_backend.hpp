#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "kfvqa/gateway.hpp"

namespace kfvqa {

struct HttpBackendConfig {
    std::string base_url;        // e.g. http://localhost:8000
    int retries = 2;             // fixed retry count, no jitter
    int timeout_seconds = 120;
    std::string api_key_env = "KFVQA_API_KEY";
};

// Client for an HTTP JSON chat-completion/embedding service. Requests ask for
// temperature-0 decoding and, when needed, per-token log-probabilities.
class HttpBackend : public ModelBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string id() const override { return "http:" + config_.base_url; }
    bool supports_logprobs() const override { return true; }
    Completion complete(const ChatRequest& request) override;
    Embedding embed(const EmbedRequest& request) override;
    std::uint64_t transport_calls() const override { return transport_calls_.load(); }

private:
    std::string post_json(const std::string& path, const std::string& body);

    HttpBackendConfig config_;
    std::atomic<std::uint64_t> transport_calls_{0};
};

}  // namespace kfvqa
