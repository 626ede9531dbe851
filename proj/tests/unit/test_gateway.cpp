#include <doctest.h>

#include <filesystem>

#include "kfvqa/cache.hpp"
#include "kfvqa/errors.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/mock_backend.hpp"
#include "kfvqa/sha256.hpp"
#include "kfvqa/templates.hpp"

using namespace kfvqa;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::shared_ptr<MockBackend> tiny_mock() {
    MockRule because;
    because.prompt_substrings = {"Q: Why?"};
    because.text = "because";
    because.tokens = {"because"};
    because.logprobs = {-0.1};
    MockRule autumn_vec;
    autumn_vec.prompt_substrings = {"autumn"};
    autumn_vec.is_embed = true;
    autumn_vec.vector = {1.0f, 0.0f, 0.0f, 0.0f};
    MockRule any_vec;
    any_vec.prompt_substrings = {};
    any_vec.is_embed = true;
    any_vec.vector = {0.0f, 1.0f, 0.0f, 0.0f};
    return MockBackend::from_rules({because, autumn_vec, any_vec});
}

ModelGateway make_gateway(std::shared_ptr<MockBackend> mock,
                          std::shared_ptr<ResponseCache> cache = nullptr) {
    return ModelGateway(mock, mock, mock, GatewayConfig{}, std::move(cache));
}

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("scripted mock echo with logprobs") {
    auto gateway = make_gateway(tiny_mock());
    const Completion c = gateway.complete_chat("Q: Why?", std::nullopt, true);
    CHECK(c.text == "because");
    REQUIRE(c.token_logprobs.size() == 1);
    CHECK(c.token_logprobs[0] == -0.1);
    CHECK(gateway.stats().transport_calls == 0);
}

TEST_CASE("identical request served from cache byte-identically") {
    TempDir dir("kfvqa_cache_test");
    auto cache = std::make_shared<ResponseCache>(dir.path);
    auto gateway = make_gateway(tiny_mock(), cache);
    const Completion first = gateway.complete_chat("Q: Why?", std::nullopt, true);
    const Completion second = gateway.complete_chat("Q: Why?", std::nullopt, true);
    CHECK(first.text == second.text);
    CHECK(first.tokens == second.tokens);
    CHECK(first.token_logprobs == second.token_logprobs);
    CHECK(first.request_digest == second.request_digest);
    CHECK(gateway.stats().backend_calls == 1);
    CHECK(gateway.stats().cache_hits == 1);
}

TEST_CASE("want_logprobs against a reply without them is a hard error") {
    MockRule rule;
    rule.prompt_substrings = {"Q:"};
    rule.text = "because";
    auto gateway = make_gateway(MockBackend::from_rules({rule}));
    CHECK_THROWS_WITH_AS(gateway.complete_chat("Q: Why?", std::nullopt, true),
                         doctest::Contains("LogprobsMissing"), Error);
    CHECK_NOTHROW(gateway.complete_chat("Q: Why?", std::nullopt, false));
}

TEST_CASE("unmatched strict mock request fails, non-strict echoes empty") {
    auto strict = make_gateway(MockBackend::from_rules({}, true));
    CHECK_THROWS_WITH_AS(strict.complete_chat("anything", std::nullopt, false),
                         doctest::Contains("MockUnmatched"), Error);
    auto lenient = make_gateway(MockBackend::from_rules({}, false));
    CHECK(lenient.complete_chat("anything", std::nullopt, false).text.empty());
}

TEST_CASE("image-conditioned rules match on the reference") {
    MockRule with_image;
    with_image.prompt_substrings = {"Describe"};
    with_image.image_ref = "img://park";
    with_image.text = "a park with trees losing their leaves";
    auto gateway = make_gateway(MockBackend::from_rules({with_image}));
    CHECK(gateway.complete_chat("Describe the image", std::string("img://park"), false).text ==
          "a park with trees losing their leaves");
    CHECK_THROWS_AS(gateway.complete_chat("Describe the image", std::string("img://city"), false),
                    Error);
}

TEST_CASE("embeddings are deterministic and cache-backed") {
    TempDir dir("kfvqa_embed_cache");
    auto cache = std::make_shared<ResponseCache>(dir.path);
    auto gateway = make_gateway(tiny_mock(), cache);
    const Embedding a = gateway.embed_text("autumn");
    const Embedding b = gateway.embed_text("autumn");
    CHECK(a.vector == std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f});
    CHECK(a.vector == b.vector);
    CHECK(a.dim == 4);
    CHECK(gateway.stats().backend_calls == 1);
}

TEST_CASE("mock scripts load from line-delimited rule files") {
    TempDir dir("kfvqa_mock_script");
    const auto script = dir.path / "script.jsonl";
    atomic_write_file(
        script,
        R"({"match":{"prompt_substring":"Q: Why?"},"reply":{"text":"because","logprobs":[-0.1]}})"
        "\n"
        R"({"match":{"prompt_substring":"autumn"},"reply":{"vector":[1,0,0,0]}})" "\n");
    auto gateway = make_gateway(MockBackend::from_script(script));
    CHECK(gateway.complete_chat("Q: Why?", std::nullopt, true).text == "because");
    CHECK(gateway.embed_text("autumn").dim == 4);
}

TEST_CASE("script validation rejects positive logprobs and length mismatches") {
    TempDir dir("kfvqa_mock_bad");
    const auto positive = dir.path / "positive.jsonl";
    atomic_write_file(positive,
                      R"({"match":{"prompt_substring":"x"},"reply":{"text":"y","logprobs":[0.5]}})"
                      "\n");
    CHECK_THROWS_AS(MockBackend::from_script(positive), Error);

    const auto mismatch = dir.path / "mismatch.jsonl";
    atomic_write_file(
        mismatch,
        R"({"match":{"prompt_substring":"x"},"reply":{"text":"one two","logprobs":[-0.1]}})" "\n");
    CHECK_THROWS_AS(MockBackend::from_script(mismatch), Error);
}

}  // TEST_SUITE

TEST_SUITE("cache") {

TEST_CASE("put then get returns identical bytes") {
    TempDir dir("kfvqa_cache_rt");
    ResponseCache cache(dir.path);
    const nlohmann::json body{{"text", "because"}, {"logprobs", {-0.1}}};
    const std::string digest = sha256_hex("some request");
    cache.put(digest, body);
    const auto hit = cache.get(digest);
    REQUIRE(hit.has_value());
    CHECK(hit->dump() == body.dump());
}

TEST_CASE("absent digest returns none") {
    TempDir dir("kfvqa_cache_absent");
    ResponseCache cache(dir.path);
    CHECK_FALSE(cache.get(sha256_hex("never stored")).has_value());
}

TEST_CASE("tampered entry surfaces CacheCorrupt") {
    TempDir dir("kfvqa_cache_corrupt");
    ResponseCache cache(dir.path);
    const std::string digest = sha256_hex("request");
    cache.put(digest, nlohmann::json{{"text", "original"}});
    const auto entry_path =
        dir.path / digest.substr(0, 2) / digest.substr(2, 2) / (digest + ".json");
    nlohmann::json entry = nlohmann::json::parse(read_file(entry_path));
    entry["body"]["text"] = "tampered";
    atomic_write_file(entry_path, entry.dump());
    CHECK_THROWS_WITH_AS(cache.get(digest), doctest::Contains("CacheCorrupt"), Error);
}

}  // TEST_SUITE

TEST_SUITE("templates") {

TEST_CASE("literal substitution") {
    PromptTemplate t;
    t.body = "Q: {question}";
    t.placeholders = {"question"};
    CHECK(render_prompt(t, {{"question", "Why?"}}) == "Q: Why?");
}

TEST_CASE("missing binding is an error; extra keys are not") {
    PromptTemplate t;
    t.body = "Q: {question}";
    t.placeholders = {"question"};
    CHECK_THROWS_WITH_AS(render_prompt(t, {}), doctest::Contains("MissingBinding"), Error);
    CHECK(render_prompt(t, {{"question", "Why?"}, {"unused", "zzz"}}) == "Q: Why?");
}

TEST_CASE("undeclared placeholder in the body is an error") {
    PromptTemplate t;
    t.body = "Q: {question} {mystery}";
    t.placeholders = {"question"};
    CHECK_THROWS_WITH_AS(render_prompt(t, {{"question", "Why?"}, {"mystery", "?"}}),
                         doctest::Contains("UnknownPlaceholder"), Error);
}

TEST_CASE("no recursive expansion; stray braces are literal") {
    PromptTemplate t;
    t.body = "{a} {} {1bad}";
    t.placeholders = {"a"};
    CHECK(render_prompt(t, {{"a", "{a}"}}) == "{a} {} {1bad}");
}

TEST_CASE("template files round trip and builtins load from the repo") {
    const auto dir = std::filesystem::temp_directory_path() / "kfvqa_tmpl_rt";
    std::filesystem::remove_all(dir);
    TemplateSet::builtin().save_dir(dir);
    const TemplateSet loaded = TemplateSet::load_dir(dir);
    CHECK(loaded.p4_answer.body == TemplateSet::builtin().p4_answer.body);
    CHECK(loaded.versions() == TemplateSet::builtin().versions());
    std::filesystem::remove_all(dir);

    const char* root = std::getenv("KFVQA_SOURCE_DIR");
    if (root == nullptr) root = KFVQA_SOURCE_DIR;
    const TemplateSet shipped =
        TemplateSet::load_dir(std::filesystem::path(root) / "data" / "templates");
    CHECK(shipped.p1_keywords.body == TemplateSet::builtin().p1_keywords.body);
    CHECK(shipped.p4_answer.body == TemplateSet::builtin().p4_answer.body);
}

}  // TEST_SUITE
