#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/gateway.hpp"

namespace kfvqa {

// One scripted rule: matches when every prompt substring occurs in the
// rendered prompt (and the image reference matches, when given). Rules carry
// either a chat reply or an embedding vector; first matching rule wins.
struct MockRule {
    std::vector<std::string> prompt_substrings;
    std::optional<std::string> image_ref;
    bool is_embed = false;
    std::string text;
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
    std::vector<float> vector;
};

class MockBackend : public ModelBackend {
public:
    static std::shared_ptr<MockBackend> from_script(const std::filesystem::path& path,
                                                    bool strict = true);
    static std::shared_ptr<MockBackend> from_rules(std::vector<MockRule> rules, bool strict = true);

    std::string id() const override { return id_; }
    bool supports_logprobs() const override { return true; }
    Completion complete(const ChatRequest& request) override;
    Embedding embed(const EmbedRequest& request) override;

    int embedding_dim() const { return embed_dim_; }

private:
    MockBackend(std::vector<MockRule> rules, bool strict, std::string id);

    std::vector<MockRule> rules_;
    bool strict_;
    std::string id_;
    int embed_dim_ = 0;
};

}  // namespace kfvqa
