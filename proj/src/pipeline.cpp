#include "kfvqa/pipeline.hpp"

#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

namespace {

// Per-sample seed for the seeded_uniform segment draw: mixes the run seed
// with the sample id so reruns stay deterministic per sample.
std::uint64_t mix_seed(std::uint64_t seed, const std::string& sample_id) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : sample_id) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    return h ^ seed;
}

json predictions_to_json(const std::vector<Prediction>& predictions) {
    json arr = json::array();
    for (const auto& p : predictions) {
        arr.push_back(json{{"j", p.j_index},
                           {"answer", p.answer.raw},
                           {"normalized", p.answer.normalized},
                           {"f", p.f},
                           {"s", p.s},
                           {"used_knowledge", p.used_knowledge}});
    }
    return arr;
}

}  // namespace

std::filesystem::path trace_path(const std::filesystem::path& run_dir,
                                 const std::string& sample_id) {
    return run_dir / "traces" / (sample_id + ".json");
}

Pipeline::Pipeline(ModelGateway& gateway, const TemplateSet& templates, const KnowledgeIndex* index,
                   const std::vector<Sample>& train_pool, std::optional<NeighborsFile> neighbors,
                   PipelineConfig config, bool lenient)
    : gateway_(&gateway),
      templates_(&templates),
      index_(index),
      train_pool_(&train_pool),
      selector_(config.example_selector, train_pool, std::move(neighbors),
                config.example_selector == SelectorKind::embedding_similarity || config.example_context
                    ? &gateway
                    : nullptr),
      config_(std::move(config)),
      lenient_(lenient) {
    config_.validate();
    config_digest_ = config_.digest();
    if (index_ != nullptr && index_->size() > 0 && !index_->has_texts()) {
        throw Error::config("InvalidValue", "index needs corpus texts attached for filtering");
    }
}

SampleOutcome Pipeline::run_sample(const Sample& sample,
                                   const std::filesystem::path& run_dir) const {
    SampleOutcome outcome;
    outcome.sample_id = sample.sample_id;

    if (!run_dir.empty()) {
        const auto path = trace_path(run_dir, sample.sample_id);
        std::error_code ec;
        if (std::filesystem::is_regular_file(path, ec)) {
            json trace = json::parse(read_file(path), nullptr, false);
            if (!trace.is_discarded() && trace.value("config_digest", "") == config_digest_) {
                outcome.trace = trace;
                outcome.resumed = true;
                outcome.final.answer.raw = trace["final"]["answer"].get<std::string>();
                outcome.final.answer.normalized = trace["final"]["normalized"].get<std::string>();
                outcome.final.winning_j = trace["final"]["winning_j"].get<int>();
                outcome.final.gate.s_max = trace["gate"]["s_max"].get<double>();
                outcome.final.gate.tau = trace["gate"]["tau"].get<double>();
                outcome.final.gate.knowledge_used = trace["gate"]["knowledge_used"].get<bool>();
                outcome.final.gate.gated = trace["gate"]["gated"].get<bool>();
                return outcome;
            }
        }
    }

    json trace;
    trace["sample_id"] = sample.sample_id;
    trace["config_digest"] = config_digest_;
    trace["template_versions"] = templates_->versions();

    // Visual context: captions plus question-guided details.
    const CaptionSet captions = caption_image(*gateway_, sample.image, config_.caption_prompt);
    const VisualQuestion visual_question =
        to_visual_question(*gateway_, *templates_, sample.question);
    const VisualDetails details =
        extract_visual_details(*gateway_, sample.image, visual_question);
    const VisualContext context = build_visual_context(captions, details);

    trace["captions"] = captions.captions;
    trace["visual_question"] = json{{"text", visual_question.text},
                                    {"fell_back", visual_question.fell_back}};
    trace["visual_details"] = json{{"text", details.text}, {"empty_reply", details.empty_reply}};

    // Retrieval query: keyword-distilled when LNQ is on, verbose otherwise.
    std::string query_text;
    json query_trace;
    if (config_.stages.lnq) {
        KeywordSet keywords;
        keywords.source_sample = sample.sample_id;
        bool keywords_empty = false;
        try {
            keywords = extract_keywords(*gateway_, *templates_, sample, config_.keyword_cap);
        } catch (const Error& e) {
            if (e.code() != "EmptyKeywords") throw;
            keywords_empty = true;
        }
        const LowNoiseQuery q = build_low_noise_query(sample.question, keywords);
        query_text = q.text;
        query_trace = json{{"text", q.text},
                           {"question_part", q.question_part},
                           {"keyword_part", q.keyword_part},
                           {"keywords", keywords.keywords},
                           {"keywords_empty", keywords_empty},
                           {"verbose", false}};
    } else {
        std::ostringstream verbose;
        verbose << sample.question;
        for (const auto& caption : captions.captions) verbose << " " << caption;
        if (!details.text.empty()) verbose << " " << details.text;
        query_text = verbose.str();
        query_trace = json{{"text", query_text}, {"verbose", true}};
    }
    trace["query"] = query_trace;

    // Exact top-r retrieval.
    std::vector<RetrievedDoc> retrieved;
    json retrieved_trace = json::array();
    if (index_ != nullptr && index_->size() > 0) {
        const Embedding query_embedding = gateway_->embed_text(query_text);
        const RetrievalResult result = search_top_r(*index_, query_embedding, config_.r);
        for (const auto& [doc_id, score] : result.ranked) {
            retrieved.push_back(RetrievedDoc{doc_id, score, index_->text_for(doc_id)});
            retrieved_trace.push_back(json{{"doc_id", doc_id}, {"score", score}});
        }
    }
    trace["retrieved"] = retrieved_trace;

    // Redundancy filtering (or raw documents when KRF is off).
    SegmentSet segments;
    if (!retrieved.empty()) {
        segments = config_.stages.krf
                       ? filter_segments(*gateway_, *templates_, retrieved, sample.question, details)
                       : segments_from_documents(retrieved);
    }
    json segments_trace = json::array();
    for (const auto& segment : segments.segments) {
        segments_trace.push_back(json{{"text", segment.text},
                                      {"source_doc_id", segment.source_doc_id
                                                            ? json(*segment.source_doc_id)
                                                            : json(nullptr)},
                                      {"verbatim", segment.verbatim}});
    }
    trace["segments"] = segments_trace;
    trace["segments_empty"] = segments.segments.empty();

    const SegmentSample selected = select_h(segments, config_.h, config_.select_mode,
                                            mix_seed(config_.seed, sample.sample_id));
    trace["selected_segments"] = selected.segments;

    const std::vector<ExampleSet> example_sets = selector_.select_all(
        sample, config_.n, config_.m, config_.example_context, config_.caption_prompt);

    const FinalAnswer final_answer =
        gate_and_answer(*gateway_, *templates_, sample, context, example_sets, selected, config_,
                        lenient_);

    trace["predictions"] = json{{"knowledge_free", predictions_to_json(final_answer.knowledge_free)},
                                {"with_knowledge", predictions_to_json(final_answer.with_knowledge)}};
    trace["gate"] = json{{"s_max", final_answer.gate.s_max},
                         {"tau", final_answer.gate.tau},
                         {"knowledge_used", final_answer.gate.knowledge_used},
                         {"gated", final_answer.gate.gated}};
    trace["final"] = json{{"answer", final_answer.answer.raw},
                          {"normalized", final_answer.answer.normalized},
                          {"winning_j", final_answer.winning_j},
                          {"used_knowledge", final_answer.gate.knowledge_used}};

    outcome.final = final_answer;
    outcome.trace = trace;
    if (!run_dir.empty()) {
        atomic_write_file(trace_path(run_dir, sample.sample_id), trace.dump() + "\n");
    }
    return outcome;
}

}  // namespace kfvqa
