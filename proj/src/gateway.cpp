#include "kfvqa/gateway.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

namespace {

constexpr char kFieldSep = '\x1f';

void validate_completion(const Completion& c, bool want_logprobs) {
    if (c.tokens.size() != c.token_logprobs.size()) {
        throw Error::backend("BadCompletion", "token/logprob length mismatch");
    }
    for (const double lp : c.token_logprobs) {
        if (!std::isfinite(lp) || lp > 0.0) {
            throw Error::backend("BadCompletion", "token log-probability must be finite and <= 0");
        }
    }
    if (want_logprobs && c.token_logprobs.empty()) {
        throw Error::backend("LogprobsMissing", "backend returned no token log-probabilities");
    }
}

void validate_embedding(const Embedding& e) {
    if (e.vector.empty() || e.dim != static_cast<int>(e.vector.size())) {
        throw Error::backend("BadEmbedding", "empty or inconsistent embedding");
    }
    for (const float v : e.vector) {
        if (!std::isfinite(v)) {
            throw Error::backend("BadEmbedding", "embedding component is not finite");
        }
    }
}

nlohmann::json completion_to_json(const Completion& c) {
    return nlohmann::json{
        {"text", c.text}, {"tokens", c.tokens}, {"logprobs", c.token_logprobs},
        {"backend_id", c.backend_id}};
}

Completion completion_from_json(const nlohmann::json& j, const std::string& digest) {
    Completion c;
    c.text = j.at("text").get<std::string>();
    c.tokens = j.at("tokens").get<std::vector<std::string>>();
    c.token_logprobs = j.at("logprobs").get<std::vector<double>>();
    c.backend_id = j.at("backend_id").get<std::string>();
    c.request_digest = digest;
    return c;
}

}  // namespace

class ModelGateway::InflightSlot {
public:
    InflightSlot(ModelGateway& g) : g_(g) {
        std::unique_lock lock(g_.inflight_mutex_);
        g_.inflight_cv_.wait(lock, [&] { return g_.inflight_ < g_.config_.max_inflight; });
        ++g_.inflight_;
    }
    ~InflightSlot() {
        {
            std::lock_guard lock(g_.inflight_mutex_);
            --g_.inflight_;
        }
        g_.inflight_cv_.notify_one();
    }

private:
    ModelGateway& g_;
};

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> chat, std::shared_ptr<ModelBackend> vision,
                           std::shared_ptr<ModelBackend> embed, GatewayConfig config,
                           std::shared_ptr<ResponseCache> cache)
    : chat_(std::move(chat)),
      vision_(std::move(vision)),
      embed_(std::move(embed)),
      config_(std::move(config)),
      cache_(std::move(cache)) {
    if (config_.max_inflight < 1) config_.max_inflight = 1;
}

std::string ModelGateway::image_digest(const std::string& image_ref) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(image_ref, ec)) {
        return sha256_file_hex(image_ref);
    }
    return sha256_hex(image_ref);
}

Completion ModelGateway::complete_chat(const std::string& prompt,
                                       const std::optional<std::string>& image,
                                       bool want_logprobs) {
    ModelBackend* backend = image ? vision_.get() : chat_.get();
    const std::string& model = image ? config_.vision_model : config_.chat_model;
    if (backend == nullptr) {
        throw Error::config("NoBackend", image ? "no vision backend configured"
                                               : "no chat backend configured");
    }
    if (want_logprobs && !backend->supports_logprobs()) {
        throw Error::backend("LogprobsMissing", "backend does not advertise log-probabilities");
    }

    std::ostringstream key;
    key << "chat" << kFieldSep << backend->id() << kFieldSep << model << kFieldSep << prompt
        << kFieldSep << (image ? image_digest(*image) : "-") << kFieldSep
        << (want_logprobs ? 1 : 0) << kFieldSep << config_.decoding.temperature << kFieldSep
        << config_.decoding.max_tokens;
    const std::string digest = sha256_hex(key.str());

    if (cache_) {
        if (auto hit = cache_->get(digest)) {
            cache_hits_.fetch_add(1);
            auto completion = completion_from_json(*hit, digest);
            validate_completion(completion, want_logprobs);
            return completion;
        }
    }

    ChatRequest request;
    request.model = model;
    request.prompt = prompt;
    request.image_ref = image;
    request.want_logprobs = want_logprobs;
    request.decoding = config_.decoding;

    Completion completion;
    {
        InflightSlot slot(*this);
        completion = backend->complete(request);
        backend_calls_.fetch_add(1);
    }
    completion.request_digest = digest;
    validate_completion(completion, want_logprobs);
    if (cache_) cache_->put(digest, completion_to_json(completion));
    return completion;
}

Embedding ModelGateway::embed_text(const std::string& text) {
    if (embed_ == nullptr) {
        throw Error::config("NoBackend", "no embedding backend configured");
    }
    std::ostringstream key;
    key << "embed" << kFieldSep << embed_->id() << kFieldSep << config_.embed_model << kFieldSep
        << text;
    const std::string digest = sha256_hex(key.str());
    const std::string text_digest = sha256_hex(text);

    if (cache_) {
        if (auto hit = cache_->get(digest)) {
            cache_hits_.fetch_add(1);
            Embedding e;
            e.vector = hit->at("vector").get<std::vector<float>>();
            e.dim = static_cast<int>(e.vector.size());
            e.source_text_digest = text_digest;
            validate_embedding(e);
            return e;
        }
    }

    Embedding e;
    {
        InflightSlot slot(*this);
        e = embed_->embed(EmbedRequest{config_.embed_model, text});
        backend_calls_.fetch_add(1);
    }
    e.dim = static_cast<int>(e.vector.size());
    e.source_text_digest = text_digest;
    validate_embedding(e);
    if (cache_) cache_->put(digest, nlohmann::json{{"vector", e.vector}});
    return e;
}

GatewayStats ModelGateway::stats() const {
    GatewayStats s;
    s.backend_calls = backend_calls_.load();
    s.cache_hits = cache_hits_.load();
    for (const auto* b : {chat_.get(), vision_.get(), embed_.get()}) {
        if (b) s.transport_calls += b->transport_calls();
    }
    // chat/vision/embed may share one backend object; avoid double counting
    if (chat_ && vision_ == chat_) s.transport_calls -= vision_->transport_calls();
    if (embed_ && (embed_ == chat_ || embed_ == vision_)) {
        s.transport_calls -= embed_->transport_calls();
    }
    return s;
}

}  // namespace kfvqa
