#include "fixture.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "kfvqa/io.hpp"

namespace kfvqa::testing {

namespace {

using nlohmann::json;

constexpr int kDim = 64;
constexpr int kSampleCount = 20;
constexpr int kTrainCount = 4;

std::string sid(int i) {
    std::ostringstream out;
    out << "s" << (i < 10 ? "0" : "") << i;
    return out.str();
}

std::string tid(int i) { return "t0" + std::to_string(i); }

char sample_class(int i) {
    if (i <= 8) return 'A';
    if (i <= 12) return 'B';
    if (i <= 16) return 'C';
    return 'D';
}

std::string question_of(int i) { return "eval question " + sid(i) + " asks what?"; }
std::string image_of(int i) { return "img://" + sid(i); }

json basis_vector(int coord, int extra_coord = -1, double extra = 0.0) {
    std::vector<double> v(kDim, 0.0);
    v[static_cast<std::size_t>(coord)] = 1.0;
    if (extra_coord >= 0) v[static_cast<std::size_t>(extra_coord)] = extra;
    return json(v);
}

json chat_rule(const std::vector<std::string>& substrings, const std::string& image_ref,
               const std::string& text, const std::vector<double>& logprobs = {}) {
    json match;
    if (substrings.size() == 1) {
        match["prompt_substring"] = substrings.front();
    } else if (!substrings.empty()) {
        match["prompt_substrings"] = substrings;
    }
    if (!image_ref.empty()) match["image_ref"] = image_ref;
    json reply{{"text", text}};
    if (!logprobs.empty()) reply["logprobs"] = logprobs;
    return json{{"match", match}, {"reply", reply}};
}

json embed_rule(const std::vector<std::string>& substrings, json vector) {
    json match;
    if (substrings.size() == 1) {
        match["prompt_substring"] = substrings.front();
    } else {
        match["prompt_substrings"] = substrings;
    }
    return json{{"match", match}, {"reply", {{"vector", std::move(vector)}}}};
}

}  // namespace

PipelineConfig fixture_config() {
    PipelineConfig config;
    config.r = 2;
    config.h = 2;
    config.tau = 0.8;
    config.m = 2;
    config.n = 2;
    config.seed = 7;
    config.select_mode = SelectMode::head;
    config.example_selector = SelectorKind::precomputed_neighbors;
    config.example_context = true;
    return config;
}

FixturePaths write_fixture(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    FixturePaths paths{dir / "dataset.jsonl", dir / "corpus.jsonl", dir / "mock_script.jsonl",
                       dir / "neighbors.jsonl"};

    // --- dataset ---------------------------------------------------------
    std::ostringstream dataset;
    for (int i = 1; i <= kSampleCount; ++i) {
        const std::string answer = "ans_" + sid(i);
        json answers = json::array();
        if (i == 7 || i == 8) {
            // partial credit: 3 matching annotators out of 10
            for (int a = 0; a < 3; ++a) answers.push_back(answer);
            for (int a = 1; a <= 7; ++a) answers.push_back("alt" + std::to_string(a) + "_" + sid(i));
        } else {
            for (int a = 0; a < 10; ++a) answers.push_back(answer);
        }
        dataset << json{{"id", sid(i)},
                        {"image", image_of(i)},
                        {"question", question_of(i)},
                        {"answers", answers},
                        {"split", "eval"}}
                       .dump()
                << "\n";
    }
    for (int t = 1; t <= kTrainCount; ++t) {
        json answers = json::array();
        for (int a = 0; a < 10; ++a) answers.push_back("ta" + std::to_string(t));
        dataset << json{{"id", tid(t)},
                        {"image", "img://" + tid(t)},
                        {"question", "train question tq0" + std::to_string(t) + " about things?"},
                        {"answers", answers},
                        {"split", "train_pool"}}
                       .dump()
                << "\n";
    }
    atomic_write_file(paths.dataset, dataset.str());

    // --- corpus ----------------------------------------------------------
    std::ostringstream corpus;
    for (int i = 1; i <= kSampleCount; ++i) {
        corpus << json{{"id", "d_" + sid(i) + "_good"},
                       {"text", "background NOISE_" + sid(i) + " body FACT_" + sid(i) +
                                    " extracted tail"}}
                      .dump()
               << "\n";
        corpus << json{{"id", "d_" + sid(i) + "_bad"},
                       {"text", "DISTRACT_" + sid(i) + " misleading unrelated passage"}}
                      .dump()
               << "\n";
    }
    for (int f = 1; f <= 4; ++f) {
        corpus << json{{"id", "d_filler_f0" + std::to_string(f)},
                       {"text", "filler document text f0" + std::to_string(f)}}
                      .dump()
               << "\n";
    }
    atomic_write_file(paths.corpus, corpus.str());

    // --- neighbors -------------------------------------------------------
    std::ostringstream neighbors;
    for (int i = 1; i <= kSampleCount; ++i) {
        neighbors << json{{"id", sid(i)}, {"neighbors", {tid(1), tid(2), tid(3), tid(4)}}}.dump()
                  << "\n";
    }
    atomic_write_file(paths.neighbors, neighbors.str());

    // --- mock script -----------------------------------------------------
    // Confidence levels used by the script (s = exp(logprob)):
    const double lp_s090 = std::log(0.90);  // above tau, knowledge-free stays
    const double lp_s095 = std::log(0.95);  // above tau
    const double lp_s050 = std::log(0.50);  // below tau, gate pulls knowledge in

    std::ostringstream script;
    const auto emit = [&](const json& rule) { script << rule.dump() << "\n"; };

    for (int i = 1; i <= kSampleCount; ++i) {
        const std::string q = question_of(i);
        const std::string img = image_of(i);
        const std::string s = sid(i);
        const char cls = sample_class(i);

        emit(chat_rule({"Describe the image"}, img,
                       "a photo with capnoise_" + s + " in view"));
        emit(chat_rule({"Keywords:", q}, img, "kwx_" + s + ", detail"));
        emit(chat_rule({"Visual question:", q}, "", "qv_" + s + " what is visible?"));
        emit(chat_rule({"qv_" + s}, img, "avdet_" + s + " observed"));
        if (cls == 'C') {
            emit(chat_rule({"Segments:", "Question: " + q}, "",
                           "FACT_" + s + " extracted\nextra segment one " + s +
                               "\nextra segment two " + s));
        } else {
            emit(chat_rule({"Segments:", "Question: " + q}, "", "FACT_" + s + " extracted"));
        }

        const std::string qline = "Q: " + q;
        if (cls == 'A') {
            emit(chat_rule({qline}, "", "ans_" + s, {lp_s090}));
            continue;
        }
        emit(chat_rule({qline, "DISTRACT_" + s}, "", "wrongd_" + s, {-0.2}));
        if (cls == 'B') {
            emit(chat_rule({qline, "NOISE_" + s}, "", "ans_" + s, {-0.3}));
            emit(chat_rule({qline, "FACT_" + s}, "", "ans_" + s, {-0.3}));
            emit(chat_rule({qline}, "", "kfwrong_" + s, {lp_s050}));
        } else if (cls == 'C') {
            emit(chat_rule({qline, "NOISE_" + s}, "", "wrongn_" + s, {-0.25}));
            emit(chat_rule({qline, "FACT_" + s}, "", "ans_" + s, {-0.3}));
            emit(chat_rule({qline}, "", "kfwrong_" + s, {lp_s050}));
        } else {  // D: every knowledge path misleads; confident without it
            emit(chat_rule({qline, "NOISE_" + s}, "", "wrongn_" + s, {-0.25}));
            emit(chat_rule({qline, "FACT_" + s}, "", "wrongf_" + s, {-0.3}));
            emit(chat_rule({qline}, "", "ans_" + s, {lp_s095}));
        }
    }
    for (int t = 1; t <= kTrainCount; ++t) {
        emit(chat_rule({"Describe the image"}, "img://" + tid(t),
                       "train context tc0" + std::to_string(t)));
    }

    // Embedding rules: query vectors first (caption noise marks the verbose
    // query), then document vectors.
    for (int i = 1; i <= kSampleCount; ++i) {
        emit(embed_rule({"capnoise_" + sid(i)}, basis_vector(20 + (i - 1), 40, 0.1)));
        emit(embed_rule({question_of(i)}, basis_vector(i - 1, 40, 0.1)));
    }
    for (int i = 1; i <= kSampleCount; ++i) {
        emit(embed_rule({"FACT_" + sid(i)}, basis_vector(i - 1)));
        emit(embed_rule({"DISTRACT_" + sid(i)}, basis_vector(20 + (i - 1))));
    }
    for (int f = 1; f <= 4; ++f) {
        emit(embed_rule({"filler document text f0" + std::to_string(f)},
                        basis_vector(39 + f)));
    }
    // train-pool question embeddings, orthogonal to every query vector, so
    // the embedding-similarity selector ranks them by ascending id
    for (int t = 1; t <= kTrainCount; ++t) {
        emit(embed_rule({"train question tq0" + std::to_string(t)}, basis_vector(43 + t)));
    }
    atomic_write_file(paths.mock_script, script.str());

    return paths;
}

}  // namespace kfvqa::testing
