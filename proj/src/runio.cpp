#include "kfvqa/runio.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/http_backend.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/mock_backend.hpp"
#include "kfvqa/sha256.hpp"

namespace kfvqa {

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    throw Error::config("InvalidValue", key + ": expected a boolean, got '" + value + "'");
}

int parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error::config("InvalidValue", key + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error::config("InvalidValue", key + ": expected a number, got '" + value + "'");
    }
}

}  // namespace

std::map<std::string, std::string> parse_ini(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error::config("FileMissing", "cannot open config file " + path.string());
    }
    std::map<std::string, std::string> entries;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        if (stripped.front() == '[' && stripped.back() == ']') {
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error::config("ParseError", path.string() + ":" + std::to_string(line_no) +
                                                  ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        entries[section.empty() ? key : section + "." + key] = value;
    }
    return entries;
}

void apply_ini(const std::map<std::string, std::string>& entries, RunSettings& s) {
    for (const auto& [key, value] : entries) {
        if (key == "pipeline.r") s.pipeline.r = parse_int(value, key);
        else if (key == "pipeline.h") s.pipeline.h = parse_int(value, key);
        else if (key == "pipeline.tau") s.pipeline.tau = parse_double(value, key);
        else if (key == "pipeline.m") s.pipeline.m = parse_int(value, key);
        else if (key == "pipeline.n") s.pipeline.n = parse_int(value, key);
        else if (key == "pipeline.seed") {
            try {
                s.pipeline.seed = std::stoull(value);
            } catch (const std::exception&) {
                throw Error::config("InvalidValue", key + ": expected an unsigned integer");
            }
        }
        else if (key == "pipeline.lnq") s.pipeline.stages.lnq = parse_bool(value, key);
        else if (key == "pipeline.krf") s.pipeline.stages.krf = parse_bool(value, key);
        else if (key == "pipeline.ski") s.pipeline.stages.ski = parse_bool(value, key);
        else if (key == "pipeline.keyword_cap") s.pipeline.keyword_cap = parse_int(value, key);
        else if (key == "pipeline.segment_cap") s.pipeline.segment_cap = parse_int(value, key);
        else if (key == "pipeline.select_mode") s.pipeline.select_mode = select_mode_from_name(value);
        else if (key == "pipeline.example_selector")
            s.pipeline.example_selector = selector_kind_from_name(value);
        else if (key == "pipeline.mean_logprob") s.pipeline.mean_logprob = parse_bool(value, key);
        else if (key == "pipeline.example_context")
            s.pipeline.example_context = parse_bool(value, key);
        else if (key == "pipeline.caption_prompt") s.pipeline.caption_prompt = value;
        else if (key == "backend.kind") s.backend.kind = value;
        else if (key == "backend.mock_script") s.backend.mock_script = value;
        else if (key == "backend.chat_url") s.backend.chat_url = value;
        else if (key == "backend.vision_url") s.backend.vision_url = value;
        else if (key == "backend.embed_url") s.backend.embed_url = value;
        else if (key == "backend.chat_model") s.backend.chat_model = value;
        else if (key == "backend.vision_model") s.backend.vision_model = value;
        else if (key == "backend.embed_model") s.backend.embed_model = value;
        else if (key == "backend.max_inflight") s.backend.max_inflight = parse_int(value, key);
        else if (key == "paths.dataset") s.dataset = value;
        else if (key == "paths.corpus") s.corpus = value;
        else if (key == "paths.index") s.index = value;
        else if (key == "paths.neighbors") s.neighbors = value;
        else if (key == "paths.templates") s.templates_dir = value;
        else if (key == "paths.cache") s.cache_dir = value;
        else if (key == "run.jobs") s.jobs = parse_int(value, key);
        else if (key == "run.lenient") s.lenient = parse_bool(value, key);
        else throw Error::config("InvalidValue", "unknown config key '" + key + "'");
    }
}

Runner build_runner(const RunSettings& settings, bool need_dataset, bool need_index) {
    Runner runner;
    runner.settings = settings;

    if (settings.backend.kind == "mock") {
        if (settings.backend.mock_script.empty()) {
            throw Error::config("InvalidValue", "mock backend needs a mock script");
        }
        auto mock = MockBackend::from_script(settings.backend.mock_script);
        runner.chat_backend = mock;
        runner.vision_backend = mock;
        runner.embed_backend = mock;
    } else if (settings.backend.kind == "http") {
        const auto make = [&](const std::string& url) -> std::shared_ptr<ModelBackend> {
            if (url.empty()) {
                throw Error::config("InvalidValue", "http backend needs chat/vision/embed urls");
            }
            HttpBackendConfig config;
            config.base_url = url;
            return std::make_shared<HttpBackend>(config);
        };
        runner.chat_backend = make(settings.backend.chat_url);
        runner.vision_backend = settings.backend.vision_url == settings.backend.chat_url
                                    ? runner.chat_backend
                                    : make(settings.backend.vision_url);
        runner.embed_backend = settings.backend.embed_url == settings.backend.chat_url
                                   ? runner.chat_backend
                               : settings.backend.embed_url == settings.backend.vision_url
                                   ? runner.vision_backend
                                   : make(settings.backend.embed_url);
    } else {
        throw Error::config("InvalidValue", "backend kind must be mock or http");
    }

    if (!settings.cache_dir.empty()) {
        runner.cache = std::make_shared<ResponseCache>(settings.cache_dir);
    }
    GatewayConfig gateway_config;
    gateway_config.chat_model = settings.backend.chat_model;
    gateway_config.vision_model = settings.backend.vision_model;
    gateway_config.embed_model = settings.backend.embed_model;
    gateway_config.max_inflight = settings.backend.max_inflight;
    runner.gateway = std::make_unique<ModelGateway>(runner.chat_backend, runner.vision_backend,
                                                    runner.embed_backend, gateway_config,
                                                    runner.cache);

    runner.templates = settings.templates_dir.empty()
                           ? TemplateSet::builtin()
                           : TemplateSet::load_dir(settings.templates_dir);

    if (need_dataset) {
        if (settings.dataset.empty()) {
            throw Error::config("InvalidValue", "a dataset file is required");
        }
        const auto samples = load_dataset(settings.dataset);
        for (const auto& sample : samples) {
            (sample.split == Split::eval ? runner.eval_samples : runner.train_pool)
                .push_back(sample);
        }
    }

    if (need_index) {
        if (settings.index.empty()) {
            throw Error::config("InvalidValue", "an index file is required");
        }
        runner.index = KnowledgeIndex::load(settings.index);
        if (!settings.corpus.empty()) {
            runner.corpus_digest = sha256_file_hex(settings.corpus);
            if (!runner.index->corpus_digest().empty() &&
                runner.index->corpus_digest() != runner.corpus_digest) {
                throw Error::integrity("IndexCorrupt",
                                       "index was built from a different corpus (digest mismatch)");
            }
            runner.index->attach_texts(load_corpus(settings.corpus));
        } else {
            throw Error::config("InvalidValue", "a corpus file is required alongside the index");
        }
    }

    if (!settings.neighbors.empty()) {
        runner.neighbors = NeighborsFile::load(settings.neighbors);
    }
    return runner;
}

void write_manifest(const std::filesystem::path& run_dir, const Runner& runner,
                    const std::string& command_line) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    json manifest{
        {"config_digest", runner.settings.pipeline.digest()},
        {"config", runner.settings.pipeline.to_json()},
        {"corpus_digest", runner.corpus_digest},
        {"template_versions", runner.templates.versions()},
        {"backends",
         {{"chat", runner.chat_backend->id()},
          {"vision", runner.vision_backend->id()},
          {"embed", runner.embed_backend->id()}}},
        {"seed", runner.settings.pipeline.seed},
        {"started_at_unix_ms",
         std::chrono::duration_cast<std::chrono::milliseconds>(now).count()},
        {"command_line", command_line}};
    atomic_write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

void prepare_run_dir(const std::filesystem::path& run_dir, const Runner& runner,
                     const std::string& command_line) {
    std::filesystem::create_directories(run_dir);
    const auto manifest_path = run_dir / "manifest.json";
    std::error_code ec;
    if (std::filesystem::is_regular_file(manifest_path, ec)) {
        const json manifest = json::parse(read_file(manifest_path), nullptr, false);
        if (manifest.is_discarded()) {
            throw Error::integrity("ManifestCorrupt", "unreadable " + manifest_path.string());
        }
        if (manifest.value("config_digest", "") != runner.settings.pipeline.digest()) {
            throw Error::integrity("ConfigMismatch",
                                   "run directory belongs to a different configuration");
        }
        return;  // resuming; keep the original manifest
    }
    write_manifest(run_dir, runner, command_line);
}

RunResult run_split(const Runner& runner, const std::filesystem::path& run_dir) {
    const Pipeline pipeline(*runner.gateway, runner.templates,
                            runner.index ? &*runner.index : nullptr, runner.train_pool,
                            runner.neighbors, runner.settings.pipeline, runner.settings.lenient);
    RunResult result;
    result.outcomes.resize(runner.eval_samples.size());
    parallel_for_samples(runner.eval_samples.size(), runner.settings.jobs, [&](std::size_t i) {
        result.outcomes[i] = pipeline.run_sample(runner.eval_samples[i], run_dir);
    });
    for (const auto& outcome : result.outcomes) {
        if (outcome.resumed) ++result.resumed;
    }
    write_answers(run_dir / "answers.jsonl", result.outcomes);
    return result;
}

void write_answers(const std::filesystem::path& path,
                   const std::vector<SampleOutcome>& outcomes) {
    std::ostringstream out;
    for (const auto& outcome : outcomes) {
        out << json{{"sample_id", outcome.sample_id},
                    {"answer", outcome.final.answer.raw},
                    {"normalized", outcome.final.answer.normalized},
                    {"winning_j", outcome.final.winning_j},
                    {"knowledge_used", outcome.final.gate.knowledge_used},
                    {"s_max", outcome.final.gate.s_max}}
                   .dump()
            << "\n";
    }
    atomic_write_file(path, out.str());
}

void write_ablation_summary(const std::filesystem::path& path,
                            const std::vector<AblationRow>& rows,
                            const std::string& base_config_digest,
                            const std::map<std::string, std::string>& template_versions) {
    std::ostringstream out;
    out << json{{"record", "header"},
                {"base_config_digest", base_config_digest},
                {"template_versions", template_versions}}
               .dump()
        << "\n";
    for (const auto& row : rows) {
        json record{{"record", "row"},
                    {"name", row.name},
                    {"lnq", row.toggles.lnq},
                    {"krf", row.toggles.krf},
                    {"ski", row.toggles.ski},
                    {"scored", row.report.scored_count},
                    {"failed", row.report.failed_count},
                    {"knowledge_used_fraction", row.report.knowledge_used_fraction}};
        if (row.report.mean_accuracy) record["mean_accuracy"] = *row.report.mean_accuracy;
        else record["mean_accuracy"] = nullptr;
        out << record.dump() << "\n";
    }
    atomic_write_file(path, out.str());
}

}  // namespace kfvqa
