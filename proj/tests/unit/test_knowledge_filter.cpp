#include <doctest.h>

#include <set>

#include "kfvqa/errors.hpp"
#include "kfvqa/knowledge_filter.hpp"
#include "kfvqa/mock_backend.hpp"
#include "kfvqa/normalize.hpp"

using namespace kfvqa;

namespace {

ModelGateway single_reply_gateway(const std::string& substring, const std::string& reply,
                                  std::shared_ptr<MockBackend>* out = nullptr) {
    MockRule rule;
    if (!substring.empty()) rule.prompt_substrings = {substring};
    rule.text = reply;
    auto mock = MockBackend::from_rules({rule});
    if (out) *out = mock;
    return ModelGateway(mock, mock, mock, GatewayConfig{});
}

std::vector<RetrievedDoc> season_docs() {
    return {{"d1", 0.9, "Leaves fall from trees in autumn. Squirrels gather food."},
            {"d2", 0.5, "Winter brings snow to many regions."}};
}

}  // namespace

TEST_SUITE("knowledge_filter") {

TEST_CASE("visual question takes the first non-empty line") {
    auto gateway = single_reply_gateway("Visual question:",
                                        "\n\nWhat foliage or weather is visible?\nsecond line");
    const VisualQuestion vq = to_visual_question(gateway, TemplateSet::builtin(),
                                                 "What season is it?");
    CHECK(vq.text == "What foliage or weather is visible?");
    CHECK(vq.origin_question == "What season is it?");
    CHECK_FALSE(vq.fell_back);
}

TEST_CASE("blank transform reply falls back to the original question") {
    auto gateway = single_reply_gateway("Visual question:", "  \n ");
    const VisualQuestion vq = to_visual_question(gateway, TemplateSet::builtin(),
                                                 "What season is it?");
    CHECK(vq.text == "What season is it?");
    CHECK(vq.fell_back);
}

TEST_CASE("visual details keep the full trimmed reply") {
    auto gateway = single_reply_gateway("", "  falling leaves on the ground \n");
    VisualQuestion vq;
    vq.text = "What is on the ground?";
    const VisualDetails details = extract_visual_details(gateway, "img://park", vq);
    CHECK(details.text == "falling leaves on the ground");
    CHECK_FALSE(details.empty_reply);

    auto empty_gateway = single_reply_gateway("", "");
    const VisualDetails empty = extract_visual_details(empty_gateway, "img://park", vq);
    CHECK(empty.text.empty());
    CHECK(empty.empty_reply);
}

TEST_CASE("segments parse with marker stripping and dedup") {
    auto gateway = single_reply_gateway("Segments:", "- A\n- A\n- B");
    const SegmentSet set = filter_segments(gateway, TemplateSet::builtin(), season_docs(),
                                           "What season is it?", VisualDetails{});
    REQUIRE(set.segments.size() == 2);
    CHECK(set.segments[0].text == "A");
    CHECK(set.segments[1].text == "B");
}

TEST_CASE("verbatim segments carry their source document") {
    auto gateway =
        single_reply_gateway("Segments:", "Leaves fall from trees in autumn.\nInvented claim.");
    const SegmentSet set = filter_segments(gateway, TemplateSet::builtin(), season_docs(),
                                           "What season is it?",
                                           VisualDetails{"falling leaves", false});
    REQUIRE(set.segments.size() == 2);
    CHECK(set.segments[0].verbatim);
    CHECK(set.segments[0].source_doc_id == std::optional<std::string>("d1"));
    CHECK_FALSE(set.segments[1].verbatim);
    CHECK_FALSE(set.segments[1].source_doc_id.has_value());
}

TEST_CASE("empty filter reply is flagged, not fatal") {
    auto gateway = single_reply_gateway("Segments:", "\n\n");
    const SegmentSet set = filter_segments(gateway, TemplateSet::builtin(), season_docs(),
                                           "What season is it?", VisualDetails{});
    CHECK(set.segments.empty());
    CHECK(set.empty_reply);
}

TEST_CASE("no two segments share a normalized form") {
    auto gateway = single_reply_gateway("Segments:", "The Autumn.\nautumn\n1. AUTUMN\nwinter");
    const SegmentSet set = filter_segments(gateway, TemplateSet::builtin(), season_docs(),
                                           "What season is it?", VisualDetails{});
    std::set<std::string> normalized;
    for (const auto& segment : set.segments) {
        CHECK(normalized.insert(normalize_answer(segment.text)).second);
    }
    CHECK(set.segments.size() == 2);
}

TEST_CASE("select_h head mode keeps the leading segments") {
    SegmentSet set;
    for (int i = 0; i < 10; ++i) set.segments.push_back({"seg" + std::to_string(i), {}, false});
    const SegmentSample sample = select_h(set, 7, SelectMode::head, 0);
    REQUIRE(sample.segments.size() == 7);
    CHECK(sample.segments.front() == "seg0");
    CHECK(sample.segments.back() == "seg6");
}

TEST_CASE("select_h clamps to the available segments") {
    SegmentSet set;
    for (int i = 0; i < 3; ++i) set.segments.push_back({"seg" + std::to_string(i), {}, false});
    CHECK(select_h(set, 7, SelectMode::head, 0).segments.size() == 3);
    CHECK(select_h(SegmentSet{}, 7, SelectMode::head, 0).segments.empty());
}

TEST_CASE("seeded uniform draws repeat exactly and stay sub-multisets") {
    SegmentSet set;
    for (int i = 0; i < 12; ++i) set.segments.push_back({"seg" + std::to_string(i), {}, false});
    for (std::uint64_t seed : {0ull, 1ull, 42ull, 12345ull}) {
        const SegmentSample first = select_h(set, 5, SelectMode::seeded_uniform, seed);
        const SegmentSample second = select_h(set, 5, SelectMode::seeded_uniform, seed);
        CHECK(first.segments == second.segments);  // re-run oracle
        REQUIRE(first.segments.size() == 5);
        std::set<std::string> unique(first.segments.begin(), first.segments.end());
        CHECK(unique.size() == 5);  // without replacement
        for (const auto& chosen : first.segments) {
            const bool member = std::any_of(set.segments.begin(), set.segments.end(),
                                            [&](const Segment& s) { return s.text == chosen; });
            CHECK(member);
        }
    }
    CHECK(select_h(set, 5, SelectMode::seeded_uniform, 1).segments !=
          select_h(set, 5, SelectMode::seeded_uniform, 2).segments);
}

TEST_CASE("raw documents become verbatim segments when filtering is off") {
    const SegmentSet set = segments_from_documents(season_docs());
    REQUIRE(set.segments.size() == 2);
    CHECK(set.segments[0].text == season_docs()[0].text);
    CHECK(set.segments[0].verbatim);
    CHECK(set.segments[0].source_doc_id == std::optional<std::string>("d1"));
}

}  // TEST_SUITE
