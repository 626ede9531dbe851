#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/cache.hpp"

namespace kfvqa {

struct DecodingParams {
    double temperature = 0.0;  // greedy decoding for reproducibility
    int max_tokens = 64;
};

struct Completion {
    std::string text;
    std::vector<std::string> tokens;
    std::vector<double> token_logprobs;
    std::string backend_id;
    std::string request_digest;
};

struct Embedding {
    std::vector<float> vector;
    int dim = 0;
    std::string source_text_digest;
};

struct ChatRequest {
    std::string model;
    std::string prompt;
    std::optional<std::string> image_ref;
    bool want_logprobs = false;
    DecodingParams decoding;
};

struct EmbedRequest {
    std::string model;
    std::string text;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string id() const = 0;
    virtual bool supports_logprobs() const = 0;
    virtual Completion complete(const ChatRequest& request) = 0;
    virtual Embedding embed(const EmbedRequest& request) = 0;
    // Actual network round trips, for asserting offline runs.
    virtual std::uint64_t transport_calls() const { return 0; }
};

struct GatewayConfig {
    std::string chat_model{"default-llm"};
    std::string vision_model{"default-vlm"};
    std::string embed_model{"default-embedder"};
    DecodingParams decoding;
    int max_inflight = 4;
};

struct GatewayStats {
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t transport_calls = 0;
};

// Uniform access to chat, vision-conditioned chat, and embedding backends,
// with a content-addressed response cache in front of every call.
class ModelGateway {
public:
    ModelGateway(std::shared_ptr<ModelBackend> chat, std::shared_ptr<ModelBackend> vision,
                 std::shared_ptr<ModelBackend> embed, GatewayConfig config,
                 std::shared_ptr<ResponseCache> cache = nullptr);

    Completion complete_chat(const std::string& prompt, const std::optional<std::string>& image,
                             bool want_logprobs);
    Embedding embed_text(const std::string& text);

    GatewayStats stats() const;
    const GatewayConfig& config() const { return config_; }

    // Digest of the image an opaque reference resolves to: file bytes when
    // the reference is a local file, the reference string otherwise.
    static std::string image_digest(const std::string& image_ref);

private:
    class InflightSlot;

    std::shared_ptr<ModelBackend> chat_;
    std::shared_ptr<ModelBackend> vision_;
    std::shared_ptr<ModelBackend> embed_;
    GatewayConfig config_;
    std::shared_ptr<ResponseCache> cache_;

    mutable std::mutex inflight_mutex_;
    std::condition_variable inflight_cv_;
    int inflight_ = 0;

    std::atomic<std::uint64_t> backend_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

}  // namespace kfvqa
