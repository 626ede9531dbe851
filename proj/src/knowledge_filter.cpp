#include "kfvqa/knowledge_filter.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/normalize.hpp"

namespace kfvqa {

namespace {

std::string strip_list_marker(std::string line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
        ++i;
    } else {
        std::size_t d = i;
        while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
        if (d > i && d < line.size() && (line[d] == '.' || line[d] == ')')) {
            i = d + 1;
        }
    }
    return trim(line.substr(i));
}

// Unbiased bounded draw; mt19937_64 output is fully specified, so results are
// identical across platforms.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

VisualQuestion to_visual_question(ModelGateway& gateway, const TemplateSet& templates,
                                  const std::string& question) {
    const std::string prompt =
        render_prompt(templates.get(TemplateId::P2_visual_question), {{"question", question}});
    const Completion reply = gateway.complete_chat(prompt, std::nullopt, false);

    VisualQuestion vq;
    vq.origin_question = question;
    for (const auto& line : split_lines(reply.text)) {
        const std::string candidate = trim(line);
        if (!candidate.empty()) {
            vq.text = candidate;
            return vq;
        }
    }
    vq.text = question;
    vq.fell_back = true;
    return vq;
}

VisualDetails extract_visual_details(ModelGateway& gateway, const std::string& image_ref,
                                     const VisualQuestion& visual_question) {
    const Completion reply = gateway.complete_chat(visual_question.text, image_ref, false);
    VisualDetails details;
    details.text = trim(reply.text);
    details.empty_reply = details.text.empty();
    return details;
}

SegmentSet filter_segments(ModelGateway& gateway, const TemplateSet& templates,
                           const std::vector<RetrievedDoc>& retrieved, const std::string& question,
                           const VisualDetails& details) {
    if (retrieved.empty()) {
        throw Error::data("EmptyRetrieval", "segment filtering needs at least one document");
    }
    std::ostringstream docs;
    for (const auto& doc : retrieved) {
        docs << "[" << doc.doc_id << "] " << doc.text << "\n";
    }
    const std::string prompt = render_prompt(templates.get(TemplateId::P3_segment_filter),
                                             {{"documents", docs.str()},
                                              {"question", question},
                                              {"visual_details", details.text}});
    const Completion reply = gateway.complete_chat(prompt, std::nullopt, false);

    SegmentSet set;
    std::set<std::string> seen;
    for (const auto& line : split_lines(reply.text)) {
        Segment segment;
        segment.text = strip_list_marker(line);
        if (segment.text.empty()) continue;
        if (!seen.insert(normalize_answer(segment.text)).second) continue;
        const std::string needle = to_lower(segment.text);
        for (const auto& doc : retrieved) {
            if (to_lower(doc.text).find(needle) != std::string::npos) {
                segment.verbatim = true;
                segment.source_doc_id = doc.doc_id;
                break;
            }
        }
        set.segments.push_back(std::move(segment));
    }
    set.empty_reply = set.segments.empty();
    return set;
}

SegmentSet segments_from_documents(const std::vector<RetrievedDoc>& retrieved) {
    SegmentSet set;
    std::set<std::string> seen;
    for (const auto& doc : retrieved) {
        if (!seen.insert(normalize_answer(doc.text)).second) continue;
        Segment segment;
        segment.text = doc.text;
        segment.source_doc_id = doc.doc_id;
        segment.verbatim = true;
        set.segments.push_back(std::move(segment));
    }
    return set;
}

SegmentSample select_h(const SegmentSet& segments, int h, SelectMode mode, std::uint64_t seed) {
    if (h < 1) {
        throw Error::config("InvalidValue", "h must be >= 1");
    }
    SegmentSample sample;
    sample.h_requested = h;
    sample.mode = mode;
    sample.seed = seed;

    const std::size_t total = segments.segments.size();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(h), total);
    if (k == 0) return sample;

    if (mode == SelectMode::head) {
        for (std::size_t i = 0; i < k; ++i) {
            sample.segments.push_back(segments.segments[i].text);
        }
        return sample;
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + bounded_rand(rng, total - i);
        std::swap(order[i], order[j]);
        sample.segments.push_back(segments.segments[order[i]].text);
    }
    return sample;
}

}  // namespace kfvqa
