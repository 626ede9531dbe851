#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/domain.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/templates.hpp"

namespace kfvqa {

struct VisualQuestion {
    std::string text;
    std::string origin_question;
    bool fell_back = false;  // blank transform reply, q_v = q
};

struct VisualDetails {
    std::string text;
    bool empty_reply = false;
};

struct Segment {
    std::string text;
    std::optional<std::string> source_doc_id;
    bool verbatim = false;  // case-insensitive substring of a retrieved document
};

struct SegmentSet {
    std::vector<Segment> segments;  // LLM output order, treated as relevance order
    bool empty_reply = false;
};

struct SegmentSample {
    std::vector<std::string> segments;
    int h_requested = 0;
    SelectMode mode = SelectMode::head;
    std::uint64_t seed = 0;
};

struct RetrievedDoc {
    std::string doc_id;
    double score = 0.0;
    std::string text;
};

VisualQuestion to_visual_question(ModelGateway& gateway, const TemplateSet& templates,
                                  const std::string& question);

VisualDetails extract_visual_details(ModelGateway& gateway, const std::string& image_ref,
                                     const VisualQuestion& visual_question);

SegmentSet filter_segments(ModelGateway& gateway, const TemplateSet& templates,
                           const std::vector<RetrievedDoc>& retrieved, const std::string& question,
                           const VisualDetails& details);

// Raw-document fallback used when redundancy filtering is toggled off: each
// retrieved document becomes one verbatim segment.
SegmentSet segments_from_documents(const std::vector<RetrievedDoc>& retrieved);

SegmentSample select_h(const SegmentSet& segments, int h, SelectMode mode, std::uint64_t seed);

}  // namespace kfvqa
