#include "kfvqa/domain.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

std::string split_name(Split s) {
    return s == Split::train_pool ? "train_pool" : "eval";
}

Split split_from_name(const std::string& name) {
    if (name == "train_pool") return Split::train_pool;
    if (name == "eval") return Split::eval;
    throw Error::data("ParseError", "unknown split: " + name);
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    if (format != DatasetFormat::jsonl) {
        throw Error::config("InvalidValue", "unsupported dataset format");
    }
    std::vector<Sample> samples;
    std::set<std::string> seen;
    read_jsonl(path, [&](std::size_t line_no, const json& record) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        for (const char* field : {"id", "image", "question"}) {
            if (!record.contains(field) || !record[field].is_string()) {
                throw Error::data("MissingField", where + ": missing field '" + field + "'");
            }
        }
        Sample s;
        s.sample_id = record["id"].get<std::string>();
        s.image = record["image"].get<std::string>();
        s.question = record["question"].get<std::string>();
        if (trim(s.question).empty()) {
            throw Error::data("MissingField", where + ": question is empty");
        }
        if (record.contains("answers")) {
            if (!record["answers"].is_array()) {
                throw Error::data("ParseError", where + ": 'answers' must be an array");
            }
            for (const auto& a : record["answers"]) {
                if (!a.is_string()) {
                    throw Error::data("ParseError", where + ": answers must be strings");
                }
                s.annotations.push_back(a.get<std::string>());
            }
        }
        s.split = record.contains("split") ? split_from_name(record["split"].get<std::string>())
                                           : Split::eval;
        if (s.split == Split::eval && s.annotations.empty()) {
            throw Error::data("MissingField", where + ": eval sample needs at least one answer");
        }
        if (!seen.insert(s.sample_id).second) {
            throw Error::data("DuplicateId", where + ": duplicate sample id '" + s.sample_id + "'");
        }
        samples.push_back(std::move(s));
    });
    return samples;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    std::ostringstream out;
    for (const auto& s : samples) {
        json record{{"id", s.sample_id},
                    {"image", s.image},
                    {"question", s.question},
                    {"answers", s.annotations},
                    {"split", split_name(s.split)}};
        out << record.dump() << "\n";
    }
    atomic_write_file(path, out.str());
}

std::string consensus_answer(const std::vector<std::string>& annotations) {
    if (annotations.empty()) {
        throw Error::data("NoAnnotations", "sample has no annotations");
    }
    std::map<std::string, int> counts;
    std::vector<std::pair<std::string, std::string>> order;  // normalized, raw
    for (const auto& raw : annotations) {
        const auto norm = normalize_answer(raw);
        if (counts.emplace(norm, 0).second) order.emplace_back(norm, raw);
        ++counts[norm];
    }
    const std::string* best_raw = &order.front().second;
    int best = -1;
    for (const auto& [norm, raw] : order) {
        if (counts[norm] > best) {
            best = counts[norm];
            best_raw = &raw;
        }
    }
    return *best_raw;
}

std::string select_mode_name(SelectMode m) {
    return m == SelectMode::head ? "head" : "seeded_uniform";
}

SelectMode select_mode_from_name(const std::string& name) {
    if (name == "head") return SelectMode::head;
    if (name == "seeded_uniform") return SelectMode::seeded_uniform;
    throw Error::config("InvalidValue", "unknown select mode: " + name);
}

std::string selector_kind_name(SelectorKind k) {
    return k == SelectorKind::precomputed_neighbors ? "precomputed_neighbors"
                                                    : "embedding_similarity";
}

SelectorKind selector_kind_from_name(const std::string& name) {
    if (name == "precomputed_neighbors") return SelectorKind::precomputed_neighbors;
    if (name == "embedding_similarity") return SelectorKind::embedding_similarity;
    throw Error::config("InvalidValue", "unknown example selector: " + name);
}

void PipelineConfig::validate() const {
    if (r < 1) throw Error::config("InvalidValue", "r must be >= 1");
    if (h < 1) throw Error::config("InvalidValue", "h must be >= 1");
    if (h > segment_cap) throw Error::config("InvalidValue", "h exceeds segment cap");
    if (m < 1) throw Error::config("InvalidValue", "m must be >= 1");
    if (n < 0) throw Error::config("InvalidValue", "n must be >= 0");
    if (tau < 0.0 || tau > 1.0) throw Error::config("InvalidValue", "tau must be in [0,1]");
    if (keyword_cap < 1) throw Error::config("InvalidValue", "keyword cap must be >= 1");
}

nlohmann::json PipelineConfig::to_json() const {
    return json{{"r", r},
                {"h", h},
                {"tau", tau},
                {"m", m},
                {"n", n},
                {"seed", seed},
                {"lnq", stages.lnq},
                {"krf", stages.krf},
                {"ski", stages.ski},
                {"keyword_cap", keyword_cap},
                {"segment_cap", segment_cap},
                {"select_mode", select_mode_name(select_mode)},
                {"example_selector", selector_kind_name(example_selector)},
                {"mean_logprob", mean_logprob},
                {"example_context", example_context},
                {"caption_prompt", caption_prompt}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.r = j.value("r", c.r);
    c.h = j.value("h", c.h);
    c.tau = j.value("tau", c.tau);
    c.m = j.value("m", c.m);
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    c.stages.lnq = j.value("lnq", c.stages.lnq);
    c.stages.krf = j.value("krf", c.stages.krf);
    c.stages.ski = j.value("ski", c.stages.ski);
    c.keyword_cap = j.value("keyword_cap", c.keyword_cap);
    c.segment_cap = j.value("segment_cap", c.segment_cap);
    if (j.contains("select_mode")) c.select_mode = select_mode_from_name(j["select_mode"]);
    if (j.contains("example_selector"))
        c.example_selector = selector_kind_from_name(j["example_selector"]);
    c.mean_logprob = j.value("mean_logprob", c.mean_logprob);
    c.example_context = j.value("example_context", c.example_context);
    c.caption_prompt = j.value("caption_prompt", c.caption_prompt);
    return c;
}

std::string PipelineConfig::digest() const {
    return sha256_hex(to_json().dump());
}

}  // namespace kfvqa
