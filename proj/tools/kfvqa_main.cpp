#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kfvqa/errors.hpp"
#include "kfvqa/evaluation.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/runio.hpp"
#include "kfvqa/sha256.hpp"

namespace {

using namespace kfvqa;

struct CliOptions {
    std::string config_file;
    std::string dataset;
    std::string corpus;
    std::string index;
    std::string neighbors;
    std::string templates_dir;
    std::string cache_dir;
    std::string run_dir;
    std::string mock_script;
    std::string chat_url;
    std::string vision_url;
    std::string embed_url;
    std::string out;
    std::string sweep_spec;
    int r = -1;
    int h = -1;
    double tau = -1.0;
    int m = -1;
    int n = -1;
    long long seed = -1;
    int jobs = -1;
    std::string toggle_lnq, toggle_krf, toggle_ski;
    bool strict = false;
    bool lenient = false;
    bool print_config = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->set_help_flag("--help", "print this help message");  // frees -h/--h
    cmd->add_option("--config", opt.config_file, "declarative config file (INI sections)");
    cmd->add_option("--dataset", opt.dataset, "dataset file (one record per line)");
    cmd->add_option("--corpus", opt.corpus, "knowledge corpus file");
    cmd->add_option("--index", opt.index, "embedding index file");
    cmd->add_option("--neighbors", opt.neighbors, "precomputed neighbors file");
    cmd->add_option("--templates", opt.templates_dir, "prompt template directory");
    cmd->add_option("--cache-dir", opt.cache_dir, "response cache directory");
    cmd->add_option("--run-dir", opt.run_dir, "run output directory");
    cmd->add_option("--mock-script", opt.mock_script, "scripted mock backend rules");
    cmd->add_option("--chat-url", opt.chat_url, "chat backend url");
    cmd->add_option("--vision-url", opt.vision_url, "vision backend url");
    cmd->add_option("--embed-url", opt.embed_url, "embedding backend url");
    cmd->add_option("--r", opt.r, "retrieved documents");
    cmd->add_option("--h", opt.h, "knowledge segments injected");
    cmd->add_option("--tau", opt.tau, "confidence threshold")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--m", opt.m, "ensemble size");
    cmd->add_option("--n", opt.n, "in-context examples");
    cmd->add_option("--seed", opt.seed, "run seed");
    cmd->add_option("--jobs", opt.jobs, "worker threads");
    cmd->add_option("--toggle-lnq", opt.toggle_lnq, "low-noise query stage on/off");
    cmd->add_option("--toggle-krf", opt.toggle_krf, "redundancy filtering stage on/off");
    cmd->add_option("--toggle-ski", opt.toggle_ski, "selective integration stage on/off");
    cmd->add_flag("--strict", opt.strict, "abort on the first per-sample failure (default)");
    cmd->add_flag("--lenient", opt.lenient, "record per-sample failures and continue");
    cmd->add_flag("--print-config", opt.print_config, "print the effective config and exit");
}

bool flag_on(const std::string& value, const char* name) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw Error::config("InvalidValue", std::string(name) + " expects on or off");
}

RunSettings resolve_settings(const CliOptions& opt) {
    RunSettings settings;
    if (!opt.config_file.empty()) {
        apply_ini(parse_ini(opt.config_file), settings);
    }
    // flags override the config file
    if (!opt.dataset.empty()) settings.dataset = opt.dataset;
    if (!opt.corpus.empty()) settings.corpus = opt.corpus;
    if (!opt.index.empty()) settings.index = opt.index;
    if (!opt.neighbors.empty()) settings.neighbors = opt.neighbors;
    if (!opt.templates_dir.empty()) settings.templates_dir = opt.templates_dir;
    if (!opt.cache_dir.empty()) settings.cache_dir = opt.cache_dir;
    if (!opt.mock_script.empty()) {
        settings.backend.kind = "mock";
        settings.backend.mock_script = opt.mock_script;
    }
    if (!opt.chat_url.empty() || !opt.vision_url.empty() || !opt.embed_url.empty()) {
        settings.backend.kind = "http";
        if (!opt.chat_url.empty()) settings.backend.chat_url = opt.chat_url;
        if (!opt.vision_url.empty()) settings.backend.vision_url = opt.vision_url;
        if (!opt.embed_url.empty()) settings.backend.embed_url = opt.embed_url;
    }
    if (opt.r >= 0) settings.pipeline.r = opt.r;
    if (opt.h >= 0) settings.pipeline.h = opt.h;
    if (opt.tau >= 0.0) settings.pipeline.tau = opt.tau;
    if (opt.m >= 0) settings.pipeline.m = opt.m;
    if (opt.n >= 0) settings.pipeline.n = opt.n;
    if (opt.seed >= 0) settings.pipeline.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.jobs >= 1) settings.jobs = opt.jobs;
    if (!opt.toggle_lnq.empty()) settings.pipeline.stages.lnq = flag_on(opt.toggle_lnq, "--toggle-lnq");
    if (!opt.toggle_krf.empty()) settings.pipeline.stages.krf = flag_on(opt.toggle_krf, "--toggle-krf");
    if (!opt.toggle_ski.empty()) settings.pipeline.stages.ski = flag_on(opt.toggle_ski, "--toggle-ski");
    if (opt.strict && opt.lenient) {
        throw Error::config("InvalidValue", "--strict and --lenient are mutually exclusive");
    }
    if (opt.strict) settings.lenient = false;
    if (opt.lenient) settings.lenient = true;
    settings.pipeline.validate();
    return settings;
}

std::string join_argv(int argc, char** argv) {
    std::ostringstream out;
    for (int i = 0; i < argc; ++i) {
        if (i > 0) out << ' ';
        out << argv[i];
    }
    return out.str();
}

int cmd_ingest(const CliOptions& opt) {
    const RunSettings settings = resolve_settings(opt);
    if (settings.corpus.empty()) {
        throw Error::config("InvalidValue", "--corpus is required");
    }
    const auto docs = load_corpus(settings.corpus);
    if (docs.empty()) {
        throw Error::data("EmptyCorpus", settings.corpus + " has no documents");
    }
    std::size_t total_chars = 0;
    for (const auto& doc : docs) total_chars += doc.text.size();
    std::cout << docs.size() << " documents, " << total_chars << " text bytes, digest "
              << sha256_file_hex(settings.corpus) << "\n";
    return 0;
}

int cmd_index(const CliOptions& opt) {
    const RunSettings settings = resolve_settings(opt);
    if (settings.corpus.empty() || opt.out.empty()) {
        throw Error::config("InvalidValue", "--corpus and --out are required");
    }
    const Runner runner = build_runner(settings, false, false);
    const auto docs = load_corpus(settings.corpus);
    if (docs.empty()) {
        throw Error::data("EmptyCorpus", settings.corpus + " has no documents");
    }
    const KnowledgeIndex index = KnowledgeIndex::build(
        *runner.gateway, docs, sha256_file_hex(settings.corpus), settings.jobs);
    index.save(opt.out);
    const auto stats = runner.gateway->stats();
    std::cout << "indexed " << index.size() << " documents at dim " << index.dim() << " into "
              << opt.out << " (" << stats.backend_calls << " embed calls, " << stats.cache_hits
              << " cache hits)\n";
    return 0;
}

int cmd_run(const CliOptions& opt, const std::string& command_line, bool score) {
    const RunSettings settings = resolve_settings(opt);
    if (opt.run_dir.empty()) {
        throw Error::config("InvalidValue", "--run-dir is required");
    }
    const Runner runner = build_runner(settings, true, !settings.index.empty());
    prepare_run_dir(opt.run_dir, runner, command_line);
    const RunResult result = run_split(runner, opt.run_dir);
    std::cout << result.outcomes.size() << " samples (" << result.resumed << " resumed)\n";

    if (score) {
        const Pipeline pipeline(*runner.gateway, runner.templates,
                                runner.index ? &*runner.index : nullptr, runner.train_pool,
                                runner.neighbors, settings.pipeline, settings.lenient);
        const EvaluationReport report =
            evaluate_split(runner.eval_samples, pipeline, opt.run_dir, settings.jobs);
        report.write_jsonl(std::filesystem::path(opt.run_dir) / "report.jsonl");
        if (report.mean_accuracy) {
            std::cout << "mean accuracy " << *report.mean_accuracy << " over "
                      << report.scored_count << " samples";
        } else {
            std::cout << "mean accuracy undefined (no scored samples)";
        }
        std::cout << ", knowledge used fraction " << report.knowledge_used_fraction << "\n";
    }
    const auto stats = runner.gateway->stats();
    std::cout << "backend calls " << stats.backend_calls << ", cache hits " << stats.cache_hits
              << ", transport calls " << stats.transport_calls << "\n";
    return 0;
}

int cmd_ablate(const CliOptions& opt, const std::string& command_line) {
    const RunSettings settings = resolve_settings(opt);
    if (opt.run_dir.empty()) {
        throw Error::config("InvalidValue", "--run-dir is required");
    }
    const Runner runner = build_runner(settings, true, !settings.index.empty());
    prepare_run_dir(opt.run_dir, runner, command_line);
    const auto rows = run_ablation(runner.eval_samples, *runner.gateway, runner.templates,
                                   runner.index ? &*runner.index : nullptr, runner.train_pool,
                                   runner.neighbors, settings.pipeline, settings.lenient,
                                   opt.run_dir, settings.jobs);
    write_ablation_summary(std::filesystem::path(opt.run_dir) / "ablation.jsonl", rows,
                           settings.pipeline.digest(), runner.templates.versions());
    for (const auto& row : rows) {
        std::cout << row.name << "\t";
        if (row.report.mean_accuracy) std::cout << *row.report.mean_accuracy;
        else std::cout << "n/a";
        std::cout << "\n";
    }
    return 0;
}

int cmd_sweep(const CliOptions& opt, const std::string& command_line) {
    const RunSettings settings = resolve_settings(opt);
    if (opt.run_dir.empty() || opt.sweep_spec.empty()) {
        throw Error::config("InvalidValue", "--run-dir and --sweep param=v1,v2,... are required");
    }
    const auto eq = opt.sweep_spec.find('=');
    if (eq == std::string::npos) {
        throw Error::config("InvalidValue", "--sweep expects param=v1,v2,...");
    }
    const SweepParam param = sweep_param_from_name(opt.sweep_spec.substr(0, eq));
    std::vector<double> values;
    std::istringstream list(opt.sweep_spec.substr(eq + 1));
    std::string item;
    while (std::getline(list, item, ',')) {
        try {
            values.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error::config("InvalidValue", "bad sweep value '" + item + "'");
        }
    }

    const Runner runner = build_runner(settings, true, !settings.index.empty());
    prepare_run_dir(opt.run_dir, runner, command_line);
    const auto points = sweep(runner.eval_samples, *runner.gateway, runner.templates,
                              runner.index ? &*runner.index : nullptr, runner.train_pool,
                              runner.neighbors, settings.pipeline, settings.lenient, param, values,
                              opt.run_dir, settings.jobs);
    const auto tsv = std::filesystem::path(opt.run_dir) /
                     ("sweep_" + sweep_param_name(param) + ".tsv");
    write_sweep_tsv(tsv, param, points, settings.pipeline.digest(), runner.templates.versions());
    for (const auto& point : points) {
        std::cout << point.value << "\t";
        if (point.report.mean_accuracy) std::cout << *point.report.mean_accuracy;
        else std::cout << "n/a";
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free knowledge-focused visual question answering"};
    app.require_subcommand(1);

    CliOptions opt;
    auto* ingest = app.add_subcommand("ingest", "validate a knowledge corpus");
    auto* index_cmd = app.add_subcommand("index", "embed a corpus into a searchable index");
    auto* run = app.add_subcommand("run", "answer every sample, writing traces and answers");
    auto* eval = app.add_subcommand("eval", "run and score against gold annotations");
    auto* ablate = app.add_subcommand("ablate", "four-row stage ablation");
    auto* sweep_cmd = app.add_subcommand("sweep", "hyper-parameter sweep");
    for (auto* cmd : {ingest, index_cmd, run, eval, ablate, sweep_cmd}) {
        add_common_flags(cmd, opt);
    }
    index_cmd->add_option("--out", opt.out, "index output path");
    sweep_cmd->add_option("--sweep", opt.sweep_spec, "param=v1,v2,... over r, h, or tau");

    CLI11_PARSE(app, argc, argv);

    try {
        if (opt.print_config) {
            const RunSettings settings = resolve_settings(opt);
            kfvqa::json effective = settings.pipeline.to_json();
            effective["config_digest"] = settings.pipeline.digest();
            std::cout << effective.dump(2) << "\n";
            return 0;
        }
        const std::string command_line = join_argv(argc, argv);
        if (ingest->parsed()) return cmd_ingest(opt);
        if (index_cmd->parsed()) return cmd_index(opt);
        if (run->parsed()) return cmd_run(opt, command_line, false);
        if (eval->parsed()) return cmd_run(opt, command_line, true);
        if (ablate->parsed()) return cmd_ablate(opt, command_line);
        if (sweep_cmd->parsed()) return cmd_sweep(opt, command_line);
    } catch (const kfvqa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kfvqa::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
