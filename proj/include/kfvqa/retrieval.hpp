#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kfvqa/domain.hpp"
#include "kfvqa/gateway.hpp"
#include "kfvqa/templates.hpp"

namespace kfvqa {

struct CorpusDoc {
    std::string doc_id;
    std::string text;
};

// Line-delimited {id, text} records; duplicate ids are rejected.
std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path);

struct KeywordSet {
    std::vector<std::string> keywords;  // lowercase, deduplicated, capped
    std::string source_sample;
};

struct LowNoiseQuery {
    std::string text;  // question_part + " " + keyword_part
    std::string question_part;
    std::string keyword_part;
};

struct RetrievalResult {
    std::vector<std::pair<std::string, double>> ranked;  // (doc_id, score), score desc, id asc
};

// Immutable embedding index over a corpus. Document texts are not part of
// the persisted format; attach them from the corpus when filtering needs
// them.
class KnowledgeIndex {
public:
    KnowledgeIndex() = default;

    // Embeds every document (bounded-parallel when jobs > 1) and keeps the
    // corpus texts attached.
    static KnowledgeIndex build(ModelGateway& gateway, const std::vector<CorpusDoc>& corpus,
                                std::string corpus_digest, int jobs = 1);
    static KnowledgeIndex from_vectors(std::vector<std::string> ids, std::vector<float> matrix,
                                       int dim, std::string corpus_digest = "");

    void save(const std::filesystem::path& path) const;
    static KnowledgeIndex load(const std::filesystem::path& path);

    int dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::string& corpus_digest() const { return corpus_digest_; }
    const std::vector<std::string>& doc_ids() const { return ids_; }
    std::span<const float> vector_of(std::size_t i) const {
        return {matrix_.data() + i * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }

    bool has_texts() const { return !texts_.empty(); }
    void attach_texts(const std::vector<CorpusDoc>& corpus);
    const std::string& text_for(const std::string& doc_id) const;

private:
    std::vector<std::string> ids_;
    std::vector<std::string> texts_;  // parallel to ids_ when attached
    std::vector<float> matrix_;       // row-major, size() x dim()
    int dim_ = 0;
    std::string corpus_digest_;
};

// Exact top-r by dot product; ties break by ascending doc_id.
RetrievalResult search_top_r(const KnowledgeIndex& index, const Embedding& query, int r);

KeywordSet extract_keywords(ModelGateway& gateway, const TemplateSet& templates,
                            const Sample& sample, int keyword_cap);

LowNoiseQuery build_low_noise_query(const std::string& question, const KeywordSet& keywords);

}  // namespace kfvqa
