#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/domain.hpp"
#include "kfvqa/normalize.hpp"
#include "kfvqa/pipeline.hpp"

namespace kfvqa {

struct SampleScore {
    std::string sample_id;
    AnswerText predicted;
    int match_count = 0;
    double accuracy = 0.0;
    bool knowledge_used = false;
    bool failed = false;
    std::string error_code;
};

struct EvaluationReport {
    std::string config_digest;
    std::map<std::string, std::string> template_versions;
    StageToggles toggles;
    std::vector<SampleScore> scores;       // dataset order, failures included
    std::optional<double> mean_accuracy;   // absent when nothing scored
    double knowledge_used_fraction = 0.0;  // over scored samples
    std::size_t scored_count = 0;
    std::size_t failed_count = 0;

    void write_jsonl(const std::filesystem::path& path) const;
};

int vqa_match_count(const AnswerText& predicted, const std::vector<std::string>& annotations);

// Standard leave-one-out averaged accuracy: with exactly 10 annotations,
// [k*min(1,(k-1)/3) + (10-k)*min(1,k/3)] / 10; otherwise min(1, k/3).
double vqa_accuracy(const AnswerText& predicted, const std::vector<std::string>& annotations);

EvaluationReport evaluate_split(const std::vector<Sample>& eval_samples, const Pipeline& pipeline,
                                const std::filesystem::path& run_dir, int jobs = 1);

struct AblationRow {
    std::string name;
    StageToggles toggles;
    EvaluationReport report;
};

// Four-row stage matrix: verbose-query baseline, then LNQ, then KRF, then
// the confidence gate.
std::vector<AblationRow> run_ablation(const std::vector<Sample>& eval_samples,
                                      ModelGateway& gateway, const TemplateSet& templates,
                                      const KnowledgeIndex* index,
                                      const std::vector<Sample>& train_pool,
                                      const std::optional<NeighborsFile>& neighbors,
                                      const PipelineConfig& base_config, bool lenient,
                                      const std::filesystem::path& run_dir, int jobs = 1);

enum class SweepParam { r, h, tau };

std::string sweep_param_name(SweepParam p);
SweepParam sweep_param_from_name(const std::string& name);

struct SweepPoint {
    double value = 0.0;
    EvaluationReport report;
};

std::vector<SweepPoint> sweep(const std::vector<Sample>& eval_samples, ModelGateway& gateway,
                              const TemplateSet& templates, const KnowledgeIndex* index,
                              const std::vector<Sample>& train_pool,
                              const std::optional<NeighborsFile>& neighbors,
                              const PipelineConfig& base_config, bool lenient, SweepParam param,
                              const std::vector<double>& values,
                              const std::filesystem::path& run_dir, int jobs = 1);

void write_sweep_tsv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<SweepPoint>& points, const std::string& config_digest,
                     const std::map<std::string, std::string>& template_versions);

}  // namespace kfvqa
