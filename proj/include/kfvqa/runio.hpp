#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kfvqa/domain.hpp"
#include "kfvqa/evaluation.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/pipeline.hpp"
#include "kfvqa/retrieval.hpp"
#include "kfvqa/templates.hpp"

namespace kfvqa {

struct BackendSettings {
    std::string kind = "mock";  // mock | http
    std::string mock_script;
    std::string chat_url;
    std::string vision_url;
    std::string embed_url;
    std::string chat_model = "default-llm";
    std::string vision_model = "default-vlm";
    std::string embed_model = "default-embedder";
    int max_inflight = 4;
};

struct RunSettings {
    PipelineConfig pipeline;
    BackendSettings backend;
    std::string dataset;
    std::string corpus;
    std::string index;
    std::string neighbors;
    std::string templates_dir;
    std::string cache_dir;
    bool lenient = false;
    int jobs = 1;
};

// Flat "section.key" -> value view of an INI-style config file.
std::map<std::string, std::string> parse_ini(const std::filesystem::path& path);
void apply_ini(const std::map<std::string, std::string>& entries, RunSettings& settings);

// Everything a command needs, assembled from settings. The index is loaded
// with corpus texts attached and its stored corpus digest verified.
struct Runner {
    std::shared_ptr<ModelBackend> chat_backend;
    std::shared_ptr<ModelBackend> vision_backend;
    std::shared_ptr<ModelBackend> embed_backend;
    std::shared_ptr<ResponseCache> cache;
    std::unique_ptr<ModelGateway> gateway;
    TemplateSet templates;
    std::optional<KnowledgeIndex> index;
    std::vector<Sample> eval_samples;
    std::vector<Sample> train_pool;
    std::optional<NeighborsFile> neighbors;
    std::string corpus_digest;
    RunSettings settings;
};

Runner build_runner(const RunSettings& settings, bool need_dataset, bool need_index);

void write_manifest(const std::filesystem::path& run_dir, const Runner& runner,
                    const std::string& command_line);

// Verifies an existing run directory belongs to the same config; fresh
// directories are initialized.
void prepare_run_dir(const std::filesystem::path& run_dir, const Runner& runner,
                     const std::string& command_line);

struct RunResult {
    std::vector<SampleOutcome> outcomes;  // dataset order
    std::size_t resumed = 0;
    std::size_t failed = 0;
};

// Runs the pipeline over every eval sample, writing traces and answers.jsonl.
RunResult run_split(const Runner& runner, const std::filesystem::path& run_dir);

void write_answers(const std::filesystem::path& path, const std::vector<SampleOutcome>& outcomes);

void write_ablation_summary(const std::filesystem::path& path,
                            const std::vector<AblationRow>& rows,
                            const std::string& base_config_digest,
                            const std::map<std::string, std::string>& template_versions);

}  // namespace kfvqa
