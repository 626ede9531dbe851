#include "kfvqa/retrieval.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/parallel.hpp"

namespace kfvqa {

namespace {

constexpr char kIndexMagic[8] = {'K', 'F', 'V', 'Q', 'I', 'D', 'X', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& what) : bytes_(bytes), what_(what) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + i]);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + i]);
        pos_ += 8;
        return v;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    void floats(float* dst, std::size_t n) {
        need(n * sizeof(float));
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw Error::integrity("IndexCorrupt", what_ + ": truncated record");
        }
    }
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path) {
    std::vector<CorpusDoc> docs;
    std::set<std::string> seen;
    read_jsonl(path, [&](std::size_t line_no, const json& record) {
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (!record.contains("id") || !record.contains("text")) {
            throw Error::data("ParseError", where + ": corpus record needs 'id' and 'text'");
        }
        CorpusDoc doc{record["id"].get<std::string>(), record["text"].get<std::string>()};
        if (trim(doc.text).empty()) {
            throw Error::data("ParseError", where + ": document text is empty");
        }
        if (!seen.insert(doc.doc_id).second) {
            throw Error::data("ParseError", where + ": duplicate doc id '" + doc.doc_id + "'");
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

KnowledgeIndex KnowledgeIndex::build(ModelGateway& gateway, const std::vector<CorpusDoc>& corpus,
                                     std::string corpus_digest, int jobs) {
    if (corpus.empty()) {
        throw Error::data("EmptyCorpus", "cannot build an index over an empty corpus");
    }
    KnowledgeIndex index;
    index.corpus_digest_ = std::move(corpus_digest);

    // The first embedding pins the dimension; the rest fill rows in place so
    // worker count cannot change the result.
    const Embedding first = gateway.embed_text(corpus.front().text);
    index.dim_ = first.dim;
    index.matrix_.assign(corpus.size() * static_cast<std::size_t>(first.dim), 0.0f);
    std::copy(first.vector.begin(), first.vector.end(), index.matrix_.begin());
    index.ids_.reserve(corpus.size());
    index.texts_.reserve(corpus.size());
    for (const auto& doc : corpus) {
        index.ids_.push_back(doc.doc_id);
        index.texts_.push_back(doc.text);
    }

    parallel_for_samples(corpus.size() - 1, jobs, [&](std::size_t offset) {
        const std::size_t i = offset + 1;
        const Embedding e = gateway.embed_text(corpus[i].text);
        if (e.dim != index.dim_) {
            throw Error::backend("DimMismatch",
                                 "document '" + corpus[i].doc_id + "' embedded at dim " +
                                     std::to_string(e.dim) + ", index dim " +
                                     std::to_string(index.dim_));
        }
        std::copy(e.vector.begin(), e.vector.end(),
                  index.matrix_.begin() + i * static_cast<std::size_t>(index.dim_));
    });
    return index;
}

KnowledgeIndex KnowledgeIndex::from_vectors(std::vector<std::string> ids, std::vector<float> matrix,
                                            int dim, std::string corpus_digest) {
    if (dim < 1 || ids.empty() || matrix.size() != ids.size() * static_cast<std::size_t>(dim)) {
        throw Error::data("DimMismatch", "matrix shape does not match ids x dim");
    }
    KnowledgeIndex index;
    index.ids_ = std::move(ids);
    index.matrix_ = std::move(matrix);
    index.dim_ = dim;
    index.corpus_digest_ = std::move(corpus_digest);
    return index;
}

void KnowledgeIndex::save(const std::filesystem::path& path) const {
    std::string out;
    out.append(kIndexMagic, sizeof(kIndexMagic));
    put_u32(out, static_cast<std::uint32_t>(dim_));
    put_u64(out, static_cast<std::uint64_t>(ids_.size()));
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        put_u32(out, static_cast<std::uint32_t>(ids_[i].size()));
        out.append(ids_[i]);
        const auto row = vector_of(i);
        out.append(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    put_u32(out, static_cast<std::uint32_t>(corpus_digest_.size()));
    out.append(corpus_digest_);
    atomic_write_file(path, out);
}

KnowledgeIndex KnowledgeIndex::load(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const std::string what = path.string();
    if (bytes.size() < sizeof(kIndexMagic) ||
        std::memcmp(bytes.data(), kIndexMagic, sizeof(kIndexMagic)) != 0) {
        throw Error::integrity("IndexCorrupt", what + ": bad magic bytes");
    }
    Reader reader(bytes, what);
    reader.raw(sizeof(kIndexMagic));
    KnowledgeIndex index;
    index.dim_ = static_cast<int>(reader.u32());
    const std::uint64_t count = reader.u64();
    if (index.dim_ < 1 || count == 0) {
        throw Error::integrity("IndexCorrupt", what + ": empty or invalid header");
    }
    index.ids_.reserve(count);
    index.matrix_.resize(count * static_cast<std::size_t>(index.dim_));
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t id_len = reader.u32();
        index.ids_.push_back(reader.raw(id_len));
        reader.floats(index.matrix_.data() + i * static_cast<std::size_t>(index.dim_),
                      static_cast<std::size_t>(index.dim_));
    }
    const std::uint32_t digest_len = reader.u32();
    index.corpus_digest_ = reader.raw(digest_len);
    if (!reader.at_end()) {
        throw Error::integrity("IndexCorrupt", what + ": trailing bytes after footer");
    }
    return index;
}

void KnowledgeIndex::attach_texts(const std::vector<CorpusDoc>& corpus) {
    std::map<std::string, const std::string*> by_id;
    for (const auto& doc : corpus) by_id[doc.doc_id] = &doc.text;
    std::vector<std::string> texts;
    texts.reserve(ids_.size());
    for (const auto& id : ids_) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw Error::integrity("IndexCorrupt",
                                   "corpus does not contain indexed document '" + id + "'");
        }
        texts.push_back(*it->second);
    }
    texts_ = std::move(texts);
}

const std::string& KnowledgeIndex::text_for(const std::string& doc_id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] == doc_id) {
            if (i >= texts_.size()) break;
            return texts_[i];
        }
    }
    throw Error::data("UnknownDoc", "no text attached for document '" + doc_id + "'");
}

RetrievalResult search_top_r(const KnowledgeIndex& index, const Embedding& query, int r) {
    if (r < 1) {
        throw Error::config("InvalidValue", "r must be >= 1");
    }
    if (index.size() == 0) {
        throw Error::data("EmptyIndex", "cannot search an empty index");
    }
    if (query.dim != index.dim()) {
        throw Error::data("DimMismatch", "query dim " + std::to_string(query.dim) +
                                             " vs index dim " + std::to_string(index.dim()));
    }

    const std::size_t n = index.size();
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = index.vector_of(i);
        double acc = 0.0;
        for (int j = 0; j < index.dim(); ++j) {
            acc += double(query.vector[static_cast<std::size_t>(j)]) * double(row[j]);
        }
        scores[i] = acc;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.doc_ids()[a] < index.doc_ids()[b];
    };
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(r), n);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), better);

    RetrievalResult result;
    result.ranked.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        result.ranked.emplace_back(index.doc_ids()[order[i]], scores[order[i]]);
    }
    return result;
}

KeywordSet extract_keywords(ModelGateway& gateway, const TemplateSet& templates,
                            const Sample& sample, int keyword_cap) {
    const std::string prompt =
        render_prompt(templates.get(TemplateId::P1_keywords), {{"question", sample.question}});
    const Completion reply = gateway.complete_chat(prompt, sample.image, false);

    KeywordSet set;
    set.source_sample = sample.sample_id;
    std::set<std::string> seen;
    std::string item;
    const auto flush = [&] {
        const std::string keyword = to_lower(trim(item));
        item.clear();
        if (keyword.empty()) return;
        if (static_cast<int>(set.keywords.size()) >= keyword_cap) return;
        if (!seen.insert(keyword).second) return;
        set.keywords.push_back(keyword);
    };
    for (const char c : reply.text) {
        if (c == ',' || c == '\n') {
            flush();
        } else {
            item.push_back(c);
        }
    }
    flush();

    if (set.keywords.empty()) {
        throw Error::backend("EmptyKeywords",
                             "no parseable keywords for sample '" + sample.sample_id + "'");
    }
    return set;
}

LowNoiseQuery build_low_noise_query(const std::string& question, const KeywordSet& keywords) {
    LowNoiseQuery q;
    q.question_part = question;
    std::ostringstream joined;
    for (std::size_t i = 0; i < keywords.keywords.size(); ++i) {
        if (i > 0) joined << ' ';
        joined << keywords.keywords[i];
    }
    q.keyword_part = joined.str();
    q.text = q.keyword_part.empty() ? q.question_part : q.question_part + " " + q.keyword_part;
    return q;
}

}  // namespace kfvqa
