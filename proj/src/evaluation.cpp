#include "kfvqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"

namespace kfvqa {

int vqa_match_count(const AnswerText& predicted, const std::vector<std::string>& annotations) {
    int k = 0;
    for (const auto& annotation : annotations) {
        if (normalize_answer(annotation) == predicted.normalized) ++k;
    }
    return k;
}

double vqa_accuracy(const AnswerText& predicted, const std::vector<std::string>& annotations) {
    if (annotations.empty()) {
        throw Error::data("NoAnnotations", "accuracy needs at least one annotation");
    }
    const int k = vqa_match_count(predicted, annotations);
    if (annotations.size() == 10) {
        // Computed in integer thirds so the result is the exactly rounded
        // rational: [k*min(1,(k-1)/3) + (10-k)*min(1,k/3)] / 10.
        const int thirds = k * std::min(3, std::max(0, k - 1)) + (10 - k) * std::min(3, k);
        return static_cast<double>(thirds) / 30.0;
    }
    return static_cast<double>(std::min(3, k)) / 3.0;
}

void EvaluationReport::write_jsonl(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << json{{"record", "header"},
                {"config_digest", config_digest},
                {"template_versions", template_versions},
                {"toggles", {{"lnq", toggles.lnq}, {"krf", toggles.krf}, {"ski", toggles.ski}}}}
               .dump()
        << "\n";
    for (const auto& score : scores) {
        if (score.failed) {
            out << json{{"record", "sample"},
                        {"sample_id", score.sample_id},
                        {"failed", true},
                        {"error_code", score.error_code}}
                       .dump()
                << "\n";
            continue;
        }
        out << json{{"record", "sample"},
                    {"sample_id", score.sample_id},
                    {"predicted", score.predicted.raw},
                    {"predicted_normalized", score.predicted.normalized},
                    {"match_count", score.match_count},
                    {"accuracy", score.accuracy},
                    {"knowledge_used", score.knowledge_used}}
                   .dump()
            << "\n";
    }
    json summary{{"record", "summary"},
                 {"scored", scored_count},
                 {"failed", failed_count},
                 {"knowledge_used_fraction", knowledge_used_fraction}};
    if (mean_accuracy) {
        summary["mean_accuracy"] = *mean_accuracy;
    } else {
        summary["mean_accuracy"] = nullptr;
        summary["mean_undefined"] = true;
    }
    out << summary.dump() << "\n";
    atomic_write_file(path, out.str());
}

EvaluationReport evaluate_split(const std::vector<Sample>& eval_samples, const Pipeline& pipeline,
                                const std::filesystem::path& run_dir, int jobs) {
    EvaluationReport report;
    report.config_digest = pipeline.config_digest();
    report.template_versions = pipeline.templates().versions();
    report.toggles = pipeline.config().stages;
    report.scores.resize(eval_samples.size());

    parallel_for_samples(eval_samples.size(), jobs, [&](std::size_t i) {
        const Sample& sample = eval_samples[i];
        SampleScore score;
        score.sample_id = sample.sample_id;
        try {
            const SampleOutcome outcome = pipeline.run_sample(sample, run_dir);
            score.predicted = outcome.final.answer;
            score.match_count = vqa_match_count(score.predicted, sample.annotations);
            score.accuracy = vqa_accuracy(score.predicted, sample.annotations);
            score.knowledge_used = outcome.final.gate.knowledge_used;
        } catch (const Error& e) {
            if (!pipeline.lenient()) throw;
            score.failed = true;
            score.error_code = e.code();
        }
        report.scores[i] = std::move(score);
    });

    double total = 0.0;
    std::size_t used = 0;
    for (const auto& score : report.scores) {
        if (score.failed) {
            ++report.failed_count;
            continue;
        }
        ++report.scored_count;
        total += score.accuracy;
        if (score.knowledge_used) ++used;
    }
    if (report.scored_count > 0) {
        report.mean_accuracy = total / static_cast<double>(report.scored_count);
        report.knowledge_used_fraction =
            static_cast<double>(used) / static_cast<double>(report.scored_count);
    }
    return report;
}

std::vector<AblationRow> run_ablation(const std::vector<Sample>& eval_samples,
                                      ModelGateway& gateway, const TemplateSet& templates,
                                      const KnowledgeIndex* index,
                                      const std::vector<Sample>& train_pool,
                                      const std::optional<NeighborsFile>& neighbors,
                                      const PipelineConfig& base_config, bool lenient,
                                      const std::filesystem::path& run_dir, int jobs) {
    const std::vector<std::pair<std::string, StageToggles>> rows{
        {"baseline", StageToggles{false, false, false}},
        {"lnq", StageToggles{true, false, false}},
        {"lnq_krf", StageToggles{true, true, false}},
        {"lnq_krf_ski", StageToggles{true, true, true}},
    };
    std::vector<AblationRow> out;
    for (const auto& [name, toggles] : rows) {
        PipelineConfig config = base_config;
        config.stages = toggles;
        const Pipeline pipeline(gateway, templates, index, train_pool, neighbors, config, lenient);
        const auto row_dir = run_dir.empty() ? run_dir : run_dir / "rows" / name;
        EvaluationReport report = evaluate_split(eval_samples, pipeline, row_dir, jobs);
        if (!row_dir.empty()) report.write_jsonl(row_dir / "report.jsonl");
        out.push_back(AblationRow{name, toggles, std::move(report)});
    }
    return out;
}

std::string sweep_param_name(SweepParam p) {
    switch (p) {
        case SweepParam::r: return "r";
        case SweepParam::h: return "h";
        case SweepParam::tau: return "tau";
    }
    throw Error::internal("BadParam", "unreachable");
}

SweepParam sweep_param_from_name(const std::string& name) {
    if (name == "r") return SweepParam::r;
    if (name == "h") return SweepParam::h;
    if (name == "tau") return SweepParam::tau;
    throw Error::config("InvalidValue", "sweep parameter must be one of r, h, tau");
}

std::vector<SweepPoint> sweep(const std::vector<Sample>& eval_samples, ModelGateway& gateway,
                              const TemplateSet& templates, const KnowledgeIndex* index,
                              const std::vector<Sample>& train_pool,
                              const std::optional<NeighborsFile>& neighbors,
                              const PipelineConfig& base_config, bool lenient, SweepParam param,
                              const std::vector<double>& values,
                              const std::filesystem::path& run_dir, int jobs) {
    if (values.empty()) {
        throw Error::config("InvalidValue", "sweep needs at least one value");
    }
    std::vector<SweepPoint> points;
    for (const double value : values) {
        PipelineConfig config = base_config;
        switch (param) {
            case SweepParam::r:
            case SweepParam::h: {
                if (value < 1.0 || value != std::floor(value)) {
                    throw Error::config("InvalidValue", sweep_param_name(param) +
                                                            " sweep values must be positive integers");
                }
                if (param == SweepParam::r) config.r = static_cast<int>(value);
                else config.h = static_cast<int>(value);
                break;
            }
            case SweepParam::tau: {
                if (value < 0.0 || value > 1.0) {
                    throw Error::config("InvalidValue", "tau sweep values must lie in [0,1]");
                }
                config.tau = value;
                break;
            }
        }
        const Pipeline pipeline(gateway, templates, index, train_pool, neighbors, config, lenient);
        std::ostringstream label;
        label << sweep_param_name(param) << "=" << value;
        const auto point_dir = run_dir.empty() ? run_dir : run_dir / "points" / label.str();
        EvaluationReport report = evaluate_split(eval_samples, pipeline, point_dir, jobs);
        if (!point_dir.empty()) report.write_jsonl(point_dir / "report.jsonl");
        points.push_back(SweepPoint{value, std::move(report)});
    }
    return points;
}

void write_sweep_tsv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<SweepPoint>& points, const std::string& config_digest,
                     const std::map<std::string, std::string>& template_versions) {
    std::ostringstream out;
    out << "# config_digest=" << config_digest;
    for (const auto& [name, version] : template_versions) out << " " << name << "=" << version;
    out << "\n# " << sweep_param_name(param) << "\tmean_accuracy\n";
    for (const auto& point : points) {
        out << json(point.value).dump() << "\t";
        if (point.report.mean_accuracy) {
            out << json(*point.report.mean_accuracy).dump();
        } else {
            out << "nan";
        }
        out << "\n";
    }
    atomic_write_file(path, out.str());
}

}  // namespace kfvqa
