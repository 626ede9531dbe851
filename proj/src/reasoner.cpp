#include "kfvqa/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"

namespace kfvqa {

namespace {

std::string first_nonempty_line(const std::string& text) {
    for (const auto& line : split_lines(text)) {
        const std::string t = trim(line);
        if (!t.empty()) return t;
    }
    return "";
}

const Prediction& argmax_f(const std::vector<Prediction>& pool) {
    if (pool.empty()) {
        throw Error::internal("EmptyPool", "no predictions to select from");
    }
    const Prediction* best = &pool.front();
    for (const auto& p : pool) {
        if (p.f > best->f) best = &p;  // strict: ties keep the lowest j_index
    }
    return *best;
}

}  // namespace

CaptionSet caption_image(ModelGateway& gateway, const std::string& image_ref,
                         const std::string& caption_prompt) {
    const Completion reply = gateway.complete_chat(caption_prompt, image_ref, false);
    CaptionSet set;
    for (const auto& line : split_lines(reply.text)) {
        const std::string caption = trim(line);
        if (!caption.empty()) set.captions.push_back(caption);
    }
    set.empty_reply = set.captions.empty();
    return set;
}

VisualContext build_visual_context(const CaptionSet& captions, const VisualDetails& details) {
    VisualContext context;
    context.captions = captions;
    context.details = details;
    std::ostringstream out;
    for (std::size_t i = 0; i < captions.captions.size(); ++i) {
        if (i > 0) out << "\n";
        out << captions.captions[i];
    }
    if (!captions.captions.empty() && !details.text.empty()) out << "\n\n";
    out << details.text;
    context.rendered = out.str();
    return context;
}

std::pair<double, double> confidence_score(const Completion& completion, bool mean_logprob) {
    if (completion.token_logprobs.empty()) {
        throw Error::data("NoTokens", "completion has no token log-probabilities");
    }
    std::vector<double> sorted = completion.token_logprobs;
    std::sort(sorted.begin(), sorted.end());
    double f = 0.0;
    for (const double lp : sorted) f += lp;
    if (mean_logprob) f /= static_cast<double>(sorted.size());
    const double s = std::exp(f);
    return {f, s};
}

NeighborsFile NeighborsFile::load(const std::filesystem::path& path) {
    NeighborsFile file;
    read_jsonl(path, [&](std::size_t line_no, const json& record) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!record.contains("id") || !record.contains("neighbors")) {
            throw Error::data("ParseError", where + ": record needs 'id' and 'neighbors'");
        }
        const std::string id = record["id"].get<std::string>();
        if (file.neighbors.count(id)) {
            throw Error::data("ParseError", where + ": duplicate id '" + id + "'");
        }
        file.neighbors[id] = record["neighbors"].get<std::vector<std::string>>();
    });
    return file;
}

ExampleSelector::ExampleSelector(SelectorKind kind, std::vector<Sample> pool,
                                 std::optional<NeighborsFile> neighbors, ModelGateway* gateway)
    : kind_(kind), pool_(std::move(pool)), neighbors_(std::move(neighbors)), gateway_(gateway) {
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (pool_[i].split == Split::train_pool) pool_by_id_[pool_[i].sample_id] = i;
    }
    if (kind_ == SelectorKind::precomputed_neighbors && !neighbors_) {
        throw Error::config("NeighborsMissing", "precomputed selector needs a neighbors file");
    }
    if (kind_ == SelectorKind::embedding_similarity && gateway_ == nullptr) {
        throw Error::config("NoBackend", "embedding selector needs a gateway");
    }
}

const Sample& ExampleSelector::pool_sample(const std::string& id) const {
    return pool_[pool_by_id_.at(id)];
}

std::vector<std::string> ExampleSelector::ranked_candidates(const Sample& sample, int limit) const {
    std::vector<std::string> ids;
    if (kind_ == SelectorKind::precomputed_neighbors) {
        const auto it = neighbors_->neighbors.find(sample.sample_id);
        if (it == neighbors_->neighbors.end()) {
            throw Error::data("NeighborsMissing",
                              "sample '" + sample.sample_id + "' absent from neighbors file");
        }
        for (const auto& id : it->second) {
            if (id == sample.sample_id) continue;
            if (!pool_by_id_.count(id)) {
                throw Error::data("NeighborsMissing",
                                  "neighbor '" + id + "' is not in the train pool");
            }
            ids.push_back(id);
            if (static_cast<int>(ids.size()) == limit) break;
        }
        return ids;
    }

    if (pool_by_id_.empty()) {
        throw Error::data("EmptyPool", "embedding selector needs a non-empty train pool");
    }
    const Embedding query = gateway_->embed_text(sample.question);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [id, pool_index] : pool_by_id_) {
        if (id == sample.sample_id) continue;
        const Sample& train_sample = pool_[pool_index];
        const Embedding e = gateway_->embed_text(train_sample.question);
        if (e.dim != query.dim) {
            throw Error::backend("DimMismatch", "pool question embedding dim differs from query");
        }
        double dot = 0.0;
        for (int j = 0; j < e.dim; ++j) {
            dot += double(query.vector[static_cast<std::size_t>(j)]) *
                   double(e.vector[static_cast<std::size_t>(j)]);
        }
        scored.emplace_back(dot, id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [score, id] : scored) {
        ids.push_back(id);
        if (static_cast<int>(ids.size()) == limit) break;
    }
    return ids;
}

ExampleSet ExampleSelector::select(const Sample& sample, int n, int m, int j_index,
                                   bool want_context, const std::string& caption_prompt) const {
    if (j_index < 1 || j_index > m) {
        throw Error::config("InvalidValue", "j_index must lie in [1, m]");
    }
    ExampleSet set;
    set.selector = kind_;
    set.j_index = j_index;
    if (n == 0) return set;

    const auto candidates = ranked_candidates(sample, m * n);
    if (candidates.empty()) {
        if (kind_ == SelectorKind::embedding_similarity) {
            throw Error::data("EmptyPool", "no candidates available for example selection");
        }
        set.clamped = true;
        return set;
    }
    const std::size_t total = candidates.size();
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(n), total);
    set.clamped = total < static_cast<std::size_t>(n);

    // Rotation partitioning: set j starts at offset (j-1)*n and wraps, so
    // every prompt in the ensemble sees a distinct slice when enough
    // candidates exist.
    const std::size_t offset = (static_cast<std::size_t>(j_index - 1) * n) % total;
    for (std::size_t i = 0; i < want; ++i) {
        const auto& id = candidates[(offset + i) % total];
        const Sample& train = pool_sample(id);
        IclExample example;
        example.question = train.question;
        example.answer = consensus_answer(train.annotations);
        if (want_context && gateway_ != nullptr) {
            const CaptionSet captions = caption_image(*gateway_, train.image, caption_prompt);
            if (!captions.captions.empty()) example.context = captions.captions.front();
        }
        set.examples.push_back(std::move(example));
    }
    return set;
}

std::vector<ExampleSet> ExampleSelector::select_all(const Sample& sample, int n, int m,
                                                    bool want_context,
                                                    const std::string& caption_prompt) const {
    std::vector<ExampleSet> sets;
    sets.reserve(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j) {
        sets.push_back(select(sample, n, m, j, want_context, caption_prompt));
    }
    return sets;
}

std::string render_examples_block(const ExampleSet& examples) {
    std::ostringstream out;
    for (const auto& example : examples.examples) {
        if (!example.context.empty()) {
            out << "Context:\n" << example.context << "\n";
        }
        out << "Q: " << example.question << "\nA: " << example.answer << "\n\n";
    }
    return out.str();
}

std::string render_knowledge_block(const SegmentSample& knowledge) {
    if (knowledge.segments.empty()) return "";
    std::ostringstream out;
    out << "Knowledge:\n";
    for (std::size_t i = 0; i < knowledge.segments.size(); ++i) {
        out << (i + 1) << ". " << knowledge.segments[i] << "\n";
    }
    out << "\n";
    return out.str();
}

std::string render_context_block(const VisualContext& context) {
    if (context.rendered.empty()) return "";
    return "Context:\n" + context.rendered + "\n\n";
}

EnsembleOutcome answer_ensemble(ModelGateway& gateway, const TemplateSet& templates,
                                const Sample& sample, const VisualContext& context,
                                const std::vector<ExampleSet>& example_sets,
                                const std::optional<SegmentSample>& knowledge, bool mean_logprob,
                                bool lenient) {
    if (example_sets.empty()) {
        throw Error::config("InvalidValue", "ensemble needs at least one example set");
    }
    const std::string knowledge_block =
        knowledge ? render_knowledge_block(*knowledge) : std::string();
    const std::string context_block = render_context_block(context);
    const bool knowledge_present = knowledge && !knowledge->segments.empty();

    EnsembleOutcome outcome;
    for (const auto& example_set : example_sets) {
        const std::string prompt =
            render_prompt(templates.get(TemplateId::P4_answer),
                          {{"examples", render_examples_block(example_set)},
                           {"context", context_block},
                           {"knowledge", knowledge_block},
                           {"question", sample.question}});
        try {
            const Completion completion = gateway.complete_chat(prompt, std::nullopt, true);
            const auto [f, s] = confidence_score(completion, mean_logprob);
            Prediction p;
            p.answer = AnswerText::from_raw(first_nonempty_line(completion.text));
            p.completion = completion;
            p.f = f;
            p.s = s;
            p.used_knowledge = knowledge_present;
            p.j_index = example_set.j_index;
            outcome.predictions.push_back(std::move(p));
        } catch (const Error&) {
            if (!lenient) throw;
            outcome.dropped_j.push_back(example_set.j_index);
        }
    }
    if (outcome.predictions.empty()) {
        throw Error::backend("EmptyEnsemble", "every ensemble member failed for sample '" +
                                                  sample.sample_id + "'");
    }
    return outcome;
}

FinalAnswer gate_and_answer(ModelGateway& gateway, const TemplateSet& templates,
                            const Sample& sample, const VisualContext& context,
                            const std::vector<ExampleSet>& example_sets,
                            const std::optional<SegmentSample>& knowledge,
                            const PipelineConfig& config, bool lenient) {
    FinalAnswer final_answer;

    const EnsembleOutcome knowledge_free =
        answer_ensemble(gateway, templates, sample, context, example_sets, std::nullopt,
                        config.mean_logprob, lenient);
    final_answer.knowledge_free = knowledge_free.predictions;

    double s_max = 0.0;
    for (const auto& p : final_answer.knowledge_free) s_max = std::max(s_max, p.s);

    GateDecision gate;
    gate.s_max = s_max;
    gate.tau = config.tau;
    gate.gated = config.stages.ski;
    const bool knowledge_available = knowledge && !knowledge->segments.empty();
    gate.knowledge_used = gate.gated ? decide_gate(s_max, config.tau) : knowledge_available;
    final_answer.gate = gate;

    const bool take_knowledge_branch = gate.gated ? gate.knowledge_used : knowledge_available;
    if (take_knowledge_branch) {
        const EnsembleOutcome with_knowledge =
            answer_ensemble(gateway, templates, sample, context, example_sets, knowledge,
                            config.mean_logprob, lenient);
        final_answer.with_knowledge = with_knowledge.predictions;
        const Prediction& best = argmax_f(final_answer.with_knowledge);
        final_answer.answer = best.answer;
        final_answer.winning_j = best.j_index;
    } else {
        const Prediction& best = argmax_f(final_answer.knowledge_free);
        final_answer.answer = best.answer;
        final_answer.winning_j = best.j_index;
    }
    return final_answer;
}

}  // namespace kfvqa
