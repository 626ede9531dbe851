#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfvqa/normalize.hpp"

namespace kfvqa {

enum class Split { train_pool, eval };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One image-question pair. The image is an opaque reference; only the model
// gateway ever reads image bytes.
struct Sample {
    std::string sample_id;
    std::string image;
    std::string question;
    std::vector<std::string> annotations;
    Split split = Split::eval;
};

enum class DatasetFormat { jsonl };

std::vector<Sample> load_dataset(const std::filesystem::path& path,
                                 DatasetFormat format = DatasetFormat::jsonl);
void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);

// Most frequent annotation (by normalized form); ties go to the earliest
// first occurrence. Used as the gold answer of in-context examples.
std::string consensus_answer(const std::vector<std::string>& annotations);

enum class SelectMode { head, seeded_uniform };
enum class SelectorKind { precomputed_neighbors, embedding_similarity };

std::string select_mode_name(SelectMode m);
SelectMode select_mode_from_name(const std::string& name);
std::string selector_kind_name(SelectorKind k);
SelectorKind selector_kind_from_name(const std::string& name);

struct StageToggles {
    bool lnq = true;   // low-noise retrieval queries
    bool krf = true;   // redundancy filtering: segments instead of documents
    bool ski = true;   // confidence-gated knowledge integration
};

struct PipelineConfig {
    int r = 20;           // retrieved documents
    int h = 7;            // knowledge segments injected at answer time
    double tau = 0.8;     // confidence threshold
    int m = 5;            // ensemble size
    int n = 10;           // in-context examples per prompt
    std::uint64_t seed = 0;
    StageToggles stages;

    int keyword_cap = 8;
    int segment_cap = 64;
    SelectMode select_mode = SelectMode::head;
    SelectorKind example_selector = SelectorKind::precomputed_neighbors;
    bool mean_logprob = false;  // length-normalized confidence variant
    bool example_context = true;
    std::string caption_prompt = "Describe the image in one short sentence.";

    void validate() const;
    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    std::string digest() const;
};

}  // namespace kfvqa
