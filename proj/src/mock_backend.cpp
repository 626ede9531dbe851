#include "kfvqa/mock_backend.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

MockRule rule_from_json(const json& record, const std::string& where) {
    MockRule rule;
    if (!record.contains("match") || !record.contains("reply")) {
        throw Error::data("ParseError", where + ": rule needs 'match' and 'reply'");
    }
    const auto& match = record["match"];
    if (match.contains("prompt_substring")) {
        rule.prompt_substrings.push_back(match["prompt_substring"].get<std::string>());
    }
    if (match.contains("prompt_substrings")) {
        for (const auto& s : match["prompt_substrings"]) {
            rule.prompt_substrings.push_back(s.get<std::string>());
        }
    }
    if (match.contains("image_ref")) {
        rule.image_ref = match["image_ref"].get<std::string>();
    }
    const auto& reply = record["reply"];
    if (reply.contains("vector")) {
        rule.is_embed = true;
        rule.vector = reply["vector"].get<std::vector<float>>();
        if (rule.vector.empty()) {
            throw Error::data("ParseError", where + ": empty embedding vector");
        }
        return rule;
    }
    rule.text = reply.value("text", std::string());
    if (reply.contains("logprobs")) {
        rule.logprobs = reply["logprobs"].get<std::vector<double>>();
        for (const double lp : rule.logprobs) {
            if (!std::isfinite(lp) || lp > 0.0) {
                throw Error::data("ParseError", where + ": logprobs must be finite and <= 0");
            }
        }
        rule.tokens = reply.contains("tokens")
                          ? reply["tokens"].get<std::vector<std::string>>()
                          : whitespace_tokens(rule.text);
        if (rule.tokens.size() != rule.logprobs.size()) {
            throw Error::data("ParseError",
                              where + ": tokens/logprobs length mismatch (" +
                                  std::to_string(rule.tokens.size()) + " vs " +
                                  std::to_string(rule.logprobs.size()) + ")");
        }
    }
    return rule;
}

std::string rules_digest(const std::vector<MockRule>& rules) {
    Sha256 h;
    for (const auto& r : rules) {
        for (const auto& s : r.prompt_substrings) h.update(s);
        if (r.image_ref) h.update(*r.image_ref);
        h.update(r.text);
        for (const auto& t : r.tokens) h.update(t);
        for (const double lp : r.logprobs) h.update(std::string_view(
            reinterpret_cast<const char*>(&lp), sizeof(lp)));
        for (const float v : r.vector) h.update(std::string_view(
            reinterpret_cast<const char*>(&v), sizeof(v)));
    }
    return h.finish_hex();
}

}  // namespace

MockBackend::MockBackend(std::vector<MockRule> rules, bool strict, std::string id)
    : rules_(std::move(rules)), strict_(strict), id_(std::move(id)) {
    for (const auto& rule : rules_) {
        if (!rule.is_embed) continue;
        const int dim = static_cast<int>(rule.vector.size());
        if (embed_dim_ == 0) {
            embed_dim_ = dim;
        } else if (embed_dim_ != dim) {
            throw Error::data("ParseError", "mock script mixes embedding dimensions");
        }
    }
}

std::shared_ptr<MockBackend> MockBackend::from_script(const std::filesystem::path& path,
                                                      bool strict) {
    std::vector<MockRule> rules;
    read_jsonl(path, [&](std::size_t line_no, const json& record) {
        rules.push_back(rule_from_json(record, path.string() + ":" + std::to_string(line_no)));
    });
    const std::string id = "mock:" + sha256_file_hex(path).substr(0, 12);
    return std::shared_ptr<MockBackend>(new MockBackend(std::move(rules), strict, id));
}

std::shared_ptr<MockBackend> MockBackend::from_rules(std::vector<MockRule> rules, bool strict) {
    const std::string id = "mock:" + rules_digest(rules).substr(0, 12);
    return std::shared_ptr<MockBackend>(new MockBackend(std::move(rules), strict, id));
}

Completion MockBackend::complete(const ChatRequest& request) {
    for (const auto& rule : rules_) {
        if (rule.is_embed) continue;
        if (rule.image_ref && (!request.image_ref || *rule.image_ref != *request.image_ref)) {
            continue;
        }
        bool all = true;
        for (const auto& sub : rule.prompt_substrings) {
            if (request.prompt.find(sub) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        Completion c;
        c.text = rule.text;
        c.tokens = rule.tokens;
        c.token_logprobs = rule.logprobs;
        c.backend_id = id_;
        return c;
    }
    if (strict_) {
        const auto head = request.prompt.substr(0, 120);
        throw Error::backend("MockUnmatched", "no mock rule matches chat prompt: \"" + head +
                                                  (request.prompt.size() > 120 ? "..." : "") +
                                                  "\"");
    }
    Completion c;
    c.backend_id = id_;
    return c;
}

Embedding MockBackend::embed(const EmbedRequest& request) {
    for (const auto& rule : rules_) {
        if (!rule.is_embed) continue;
        bool all = true;
        for (const auto& sub : rule.prompt_substrings) {
            if (request.text.find(sub) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        Embedding e;
        e.vector = rule.vector;
        e.dim = static_cast<int>(rule.vector.size());
        return e;
    }
    if (strict_) {
        throw Error::backend("MockUnmatched",
                             "no mock rule matches embed input: \"" + request.text.substr(0, 120) +
                                 (request.text.size() > 120 ? "..." : "") + "\"");
    }
    Embedding e;
    e.vector.assign(embed_dim_ > 0 ? embed_dim_ : 1, 0.0f);
    e.dim = static_cast<int>(e.vector.size());
    return e;
}

}  // namespace kfvqa
