#include "kfvqa/http_backend.hpp"

#include <cstdlib>
#include <filesystem>

#include <httplib.h>
#include <json.hpp>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"

namespace kfvqa {

namespace {

using nlohmann::json;

// Local files are inlined as base64 data URLs; anything else is passed
// through as a URI for the server to fetch.
json image_part(const std::string& image_ref) {
    std::error_code ec;
    std::string url;
    if (std::filesystem::is_regular_file(image_ref, ec)) {
        url = "data:application/octet-stream;base64," + base64_encode(read_file(image_ref));
    } else {
        url = image_ref;
    }
    return json{{"type", "image_url"}, {"image_url", {{"url", url}}}};
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error::config("InvalidValue", "http backend needs a base url");
    }
}

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
    std::string error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        transport_calls_.fetch_add(1);
        auto res = client.Post(path, headers, body, "application/json");
        if (res && res->status == 200) {
            return res->body;
        }
        error = res ? "status " + std::to_string(res->status)
                    : "transport error " + httplib::to_string(res.error());
    }
    throw Error::backend("BackendUnreachable",
                         config_.base_url + path + " failed after " +
                             std::to_string(config_.retries + 1) + " attempts: " + error);
}

Completion HttpBackend::complete(const ChatRequest& request) {
    json content;
    if (request.image_ref) {
        content = json::array({json{{"type", "text"}, {"text", request.prompt}},
                               image_part(*request.image_ref)});
    } else {
        content = request.prompt;
    }
    json body{{"model", request.model},
              {"messages", json::array({json{{"role", "user"}, {"content", content}}})},
              {"temperature", request.decoding.temperature},
              {"max_tokens", request.decoding.max_tokens}};
    if (request.want_logprobs) {
        body["logprobs"] = true;
    }

    const std::string raw = post_json("/v1/chat/completions", body.dump());
    json reply = json::parse(raw, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
        throw Error::backend("BadCompletion", "malformed chat completion response");
    }
    const auto& choice = reply["choices"][0];

    Completion c;
    c.backend_id = id();
    c.text = choice.at("message").at("content").get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content")) {
        for (const auto& tok : choice["logprobs"]["content"]) {
            c.tokens.push_back(tok.at("token").get<std::string>());
            c.token_logprobs.push_back(tok.at("logprob").get<double>());
        }
    }
    if (request.want_logprobs && c.token_logprobs.empty()) {
        throw Error::backend("LogprobsMissing",
                             "backend response carries no token log-probabilities");
    }
    return c;
}

Embedding HttpBackend::embed(const EmbedRequest& request) {
    json body{{"model", request.model}, {"input", request.text}};
    const std::string raw = post_json("/v1/embeddings", body.dump());
    json reply = json::parse(raw, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || reply["data"].empty() ||
        !reply["data"][0].contains("embedding")) {
        throw Error::backend("BadEmbedding", "malformed embedding response");
    }
    Embedding e;
    e.vector = reply["data"][0]["embedding"].get<std::vector<float>>();
    e.dim = static_cast<int>(e.vector.size());
    return e;
}

}  // namespace kfvqa
