#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/domain.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/knowledge_filter.hpp"
#include "kfvqa/templates.hpp"

namespace kfvqa {

struct CaptionSet {
    std::vector<std::string> captions;
    bool empty_reply = false;
};

struct VisualContext {
    CaptionSet captions;
    VisualDetails details;
    std::string rendered;  // caption lines, blank line, details; empty parts omitted
};

struct IclExample {
    std::string question;
    std::string context;
    std::string answer;
};

struct ExampleSet {
    std::vector<IclExample> examples;
    SelectorKind selector = SelectorKind::precomputed_neighbors;
    int j_index = 1;
    bool clamped = false;  // requested more examples than the pool holds
};

struct Prediction {
    AnswerText answer;
    Completion completion;
    double f = 0.0;  // aggregated answer log-probability
    double s = 0.0;  // exp(f), in (0, 1]
    bool used_knowledge = false;
    int j_index = 1;
};

struct GateDecision {
    double s_max = 0.0;
    double tau = 0.0;
    bool knowledge_used = false;
    bool gated = true;  // false when a stage toggle forced the branch
};

struct FinalAnswer {
    AnswerText answer;
    int winning_j = 1;
    GateDecision gate;
    std::vector<Prediction> knowledge_free;
    std::vector<Prediction> with_knowledge;
};

CaptionSet caption_image(ModelGateway& gateway, const std::string& image_ref,
                         const std::string& caption_prompt);

VisualContext build_visual_context(const CaptionSet& captions, const VisualDetails& details);

// f = sum of token log-probabilities, s = exp(f). Summation runs over the
// values in ascending order so s is exactly permutation invariant.
std::pair<double, double> confidence_score(const Completion& completion, bool mean_logprob = false);

inline bool decide_gate(double s_max, double tau) { return s_max <= tau; }

struct NeighborsFile {
    std::map<std::string, std::vector<std::string>> neighbors;
    static NeighborsFile load(const std::filesystem::path& path);
};

// Ranks in-context example candidates for one sample and slices them into m
// rotation-partitioned sets of n. Owns its copy of the train pool.
class ExampleSelector {
public:
    ExampleSelector(SelectorKind kind, std::vector<Sample> pool,
                    std::optional<NeighborsFile> neighbors, ModelGateway* gateway);

    ExampleSet select(const Sample& sample, int n, int m, int j_index, bool want_context,
                      const std::string& caption_prompt) const;
    std::vector<ExampleSet> select_all(const Sample& sample, int n, int m, bool want_context,
                                       const std::string& caption_prompt) const;

    // Candidate pool ids ranked for this sample (before rotation slicing).
    std::vector<std::string> ranked_candidates(const Sample& sample, int limit) const;

private:
    const Sample& pool_sample(const std::string& id) const;

    SelectorKind kind_;
    std::vector<Sample> pool_;
    std::optional<NeighborsFile> neighbors_;
    ModelGateway* gateway_;
    std::map<std::string, std::size_t> pool_by_id_;
};

std::string render_examples_block(const ExampleSet& examples);
std::string render_knowledge_block(const SegmentSample& knowledge);
std::string render_context_block(const VisualContext& context);

struct EnsembleOutcome {
    std::vector<Prediction> predictions;
    std::vector<int> dropped_j;  // lenient mode: members that failed
};

EnsembleOutcome answer_ensemble(ModelGateway& gateway, const TemplateSet& templates,
                                const Sample& sample, const VisualContext& context,
                                const std::vector<ExampleSet>& example_sets,
                                const std::optional<SegmentSample>& knowledge, bool mean_logprob,
                                bool lenient);

// Runs the knowledge-free ensemble, evaluates the gate, and (when the gate or
// a toggle asks for it) the knowledge-conditioned ensemble.
FinalAnswer gate_and_answer(ModelGateway& gateway, const TemplateSet& templates,
                            const Sample& sample, const VisualContext& context,
                            const std::vector<ExampleSet>& example_sets,
                            const std::optional<SegmentSample>& knowledge,
                            const PipelineConfig& config, bool lenient);

}  // namespace kfvqa
