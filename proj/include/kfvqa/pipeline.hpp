#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfvqa/domain.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/parallel.hpp"
#include "kfvqa/knowledge_filter.hpp"
#include "kfvqa/reasoner.hpp"
#include "kfvqa/retrieval.hpp"
#include "kfvqa/templates.hpp"

namespace kfvqa {

// Per-sample audit record written into the run directory.
struct SampleOutcome {
    std::string sample_id;
    FinalAnswer final;
    nlohmann::json trace;
    bool resumed = false;
};

// One fully wired answering pipeline: visual context, retrieval, filtering,
// gated ensemble reasoning, trace writing.
class Pipeline {
public:
    Pipeline(ModelGateway& gateway, const TemplateSet& templates, const KnowledgeIndex* index,
             const std::vector<Sample>& train_pool, std::optional<NeighborsFile> neighbors,
             PipelineConfig config, bool lenient);

    // Writes traces under run_dir/traces when run_dir is non-empty; a trace
    // whose config digest matches is reused instead of recomputed.
    SampleOutcome run_sample(const Sample& sample, const std::filesystem::path& run_dir) const;

    const PipelineConfig& config() const { return config_; }
    const std::string& config_digest() const { return config_digest_; }
    const TemplateSet& templates() const { return *templates_; }
    ModelGateway& gateway() const { return *gateway_; }
    bool lenient() const { return lenient_; }

private:
    ModelGateway* gateway_;
    const TemplateSet* templates_;
    const KnowledgeIndex* index_;
    const std::vector<Sample>* train_pool_;
    ExampleSelector selector_;
    PipelineConfig config_;
    std::string config_digest_;
    bool lenient_;
};

std::filesystem::path trace_path(const std::filesystem::path& run_dir,
                                 const std::string& sample_id);

}  // namespace kfvqa
