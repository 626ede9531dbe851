#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "kfvqa/domain.hpp"
#include "kfvqa/errors.hpp"
#include "kfvqa/evaluation.hpp"
#include "kfvqa/knowledge_filter.hpp"
#include "kfvqa/normalize.hpp"
#include "kfvqa/reasoner.hpp"
#include "kfvqa/retrieval.hpp"

namespace py = pybind11;
using namespace kfvqa;

namespace {

KnowledgeIndex index_from_vectors(const std::vector<std::string>& ids,
                                  const std::vector<std::vector<float>>& vectors) {
    if (ids.size() != vectors.size() || vectors.empty()) {
        throw Error::data("DimMismatch", "ids and vectors must have equal, non-zero length");
    }
    const int dim = static_cast<int>(vectors.front().size());
    std::vector<float> matrix;
    matrix.reserve(ids.size() * static_cast<std::size_t>(dim));
    for (const auto& row : vectors) {
        if (static_cast<int>(row.size()) != dim) {
            throw Error::data("DimMismatch", "vectors must all share one dimension");
        }
        matrix.insert(matrix.end(), row.begin(), row.end());
    }
    return KnowledgeIndex::from_vectors(ids, std::move(matrix), dim);
}

std::vector<std::pair<std::string, double>> index_search(const KnowledgeIndex& index,
                                                         const std::vector<float>& query, int r) {
    Embedding q;
    q.vector = query;
    q.dim = static_cast<int>(query.size());
    return search_top_r(index, q, r).ranked;
}

}  // namespace

PYBIND11_MODULE(_kfvqa, m) {
    m.doc() = "core operations of the knowledge-focused VQA pipeline";

    py::register_exception<Error>(m, "KfvqaError");

    m.def("normalize_answer", [](const std::string& raw) { return normalize_answer(raw); },
          py::arg("raw"),
          "Standard VQA answer normalization: lowercase, strip punctuation, drop "
          "articles, map number words to digits.");

    m.def(
        "vqa_accuracy",
        [](const std::string& predicted, const std::vector<std::string>& annotations) {
            return vqa_accuracy(AnswerText::from_raw(predicted), annotations);
        },
        py::arg("predicted"), py::arg("annotations"),
        "Leave-one-out averaged accuracy against gold annotations.");

    m.def(
        "vqa_match_count",
        [](const std::string& predicted, const std::vector<std::string>& annotations) {
            return vqa_match_count(AnswerText::from_raw(predicted), annotations);
        },
        py::arg("predicted"), py::arg("annotations"));

    m.def(
        "confidence_score",
        [](const std::vector<double>& token_logprobs, bool mean_logprob) {
            Completion c;
            c.token_logprobs = token_logprobs;
            c.tokens.resize(token_logprobs.size());
            return confidence_score(c, mean_logprob);
        },
        py::arg("token_logprobs"), py::arg("mean_logprob") = false,
        "Returns (f, s): the aggregated log-probability and its exponential.");

    m.def("decide_gate", &decide_gate, py::arg("s_max"), py::arg("tau"),
          "True when confidence is low enough that knowledge should be integrated.");

    m.def(
        "build_low_noise_query",
        [](const std::string& question, const std::vector<std::string>& keywords) {
            KeywordSet set;
            set.keywords = keywords;
            return build_low_noise_query(question, set).text;
        },
        py::arg("question"), py::arg("keywords"));

    m.def(
        "select_h",
        [](const std::vector<std::string>& segments, int h, const std::string& mode,
           std::uint64_t seed) {
            SegmentSet set;
            for (const auto& text : segments) set.segments.push_back({text, std::nullopt, false});
            return select_h(set, h, select_mode_from_name(mode), seed).segments;
        },
        py::arg("segments"), py::arg("h"), py::arg("mode") = "head", py::arg("seed") = 0);

    py::class_<KnowledgeIndex>(m, "Index")
        .def_static("from_vectors", &index_from_vectors, py::arg("ids"), py::arg("vectors"))
        .def_static("load",
                    [](const std::string& path) { return KnowledgeIndex::load(path); },
                    py::arg("path"))
        .def("save", [](const KnowledgeIndex& index, const std::string& path) { index.save(path); },
             py::arg("path"))
        .def("search", &index_search, py::arg("query"), py::arg("r"),
             "Exact top-r dot-product search; ties break by ascending doc id.")
        .def_property_readonly("dim", &KnowledgeIndex::dim)
        .def("__len__", [](const KnowledgeIndex& index) { return index.size(); });
}
