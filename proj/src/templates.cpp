#include "kfvqa/templates.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"

namespace kfvqa {

namespace {

bool is_placeholder_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

PromptTemplate make_template(TemplateId id, std::set<std::string> placeholders, std::string body) {
    PromptTemplate t;
    t.template_id = id;
    t.placeholders = std::move(placeholders);
    t.body = std::move(body);
    return t;
}

TemplateSet make_builtin() {
    TemplateSet s;
    s.p1_keywords = make_template(
        TemplateId::P1_keywords, {"question"},
        "Look at the image and read the question. List concise keywords that capture the "
        "essential content of the pair. Reply with a comma-separated list of keywords only.\n"
        "Question: {question}\n"
        "Keywords:");
    s.p2_visual_question = make_template(
        TemplateId::P2_visual_question, {"question"},
        "Rewrite the question below as a purely visual question about what can be seen in an "
        "image, without requiring outside knowledge. Reply with the rewritten question only.\n"
        "Question: {question}\n"
        "Visual question:");
    s.p3_segment_filter = make_template(
        TemplateId::P3_segment_filter, {"documents", "question", "visual_details"},
        "Below are retrieved knowledge documents, a question, and visual details observed in the "
        "image. Copy or condense the segments that help answer the question, one per line. Reply "
        "with segments only.\n"
        "Documents:\n"
        "{documents}\n"
        "Question: {question}\n"
        "Visual details: {visual_details}\n"
        "Segments:");
    s.p4_answer = make_template(
        TemplateId::P4_answer, {"examples", "context", "knowledge", "question"},
        "Answer each question with a short answer of a few words.\n"
        "\n"
        "{examples}{context}{knowledge}Q: {question}\n"
        "A:");
    return s;
}

}  // namespace

std::string template_id_name(TemplateId id) {
    switch (id) {
        case TemplateId::P1_keywords: return "P1_keywords";
        case TemplateId::P2_visual_question: return "P2_visual_question";
        case TemplateId::P3_segment_filter: return "P3_segment_filter";
        case TemplateId::P4_answer: return "P4_answer";
    }
    throw Error::internal("BadTemplateId", "unreachable");
}

TemplateId template_id_from_name(const std::string& name) {
    if (name == "P1_keywords") return TemplateId::P1_keywords;
    if (name == "P2_visual_question") return TemplateId::P2_visual_question;
    if (name == "P3_segment_filter") return TemplateId::P3_segment_filter;
    if (name == "P4_answer") return TemplateId::P4_answer;
    throw Error::config("InvalidValue", "unknown template id: " + name);
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error::config("FileMissing", "cannot open template " + path.string());
    }
    PromptTemplate t;
    t.version.clear();
    bool have_id = false;
    std::string line;
    std::ostringstream body;
    bool in_body = false;
    bool first_body_line = true;
    while (std::getline(in, line)) {
        if (!in_body && !line.empty() && line[0] == '#') {
            std::istringstream hdr(line.substr(1));
            std::string word;
            hdr >> word;
            if (word == "template:") {
                hdr >> word;
                t.template_id = template_id_from_name(word);
                have_id = true;
            } else if (word == "version:") {
                hdr >> t.version;
            } else if (word == "placeholders:") {
                while (hdr >> word) t.placeholders.insert(word);
            }
            continue;
        }
        in_body = true;
        if (!first_body_line) body << "\n";
        body << line;
        first_body_line = false;
    }
    if (!have_id || t.version.empty()) {
        throw Error::config("ParseError", path.string() + ": template header incomplete");
    }
    t.body = body.str();
    return t;
}

void PromptTemplate::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "# template: " << template_id_name(template_id) << "\n";
    out << "# version: " << version << "\n";
    out << "# placeholders:";
    for (const auto& p : placeholders) out << " " << p;
    out << "\n" << body << "\n";
    atomic_write_file(path, out.str());
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings) {
    const std::string& body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] != '{') {
            out.push_back(body[i++]);
            continue;
        }
        std::size_t j = i + 1;
        if (j < body.size() && is_placeholder_start(body[j])) {
            ++j;
            while (j < body.size() && is_placeholder_char(body[j])) ++j;
        }
        if (j >= body.size() || body[j] != '}' || j == i + 1) {
            // not a placeholder; keep the brace literally
            out.push_back(body[i++]);
            continue;
        }
        const std::string name = body.substr(i + 1, j - i - 1);
        if (!tmpl.placeholders.count(name)) {
            throw Error::config("UnknownPlaceholder",
                                "template " + template_id_name(tmpl.template_id) +
                                    " does not declare placeholder '" + name + "'");
        }
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw Error::config("MissingBinding", "no binding for placeholder '" + name + "'");
        }
        out += it->second;
        i = j + 1;
    }
    return out;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
    switch (id) {
        case TemplateId::P1_keywords: return p1_keywords;
        case TemplateId::P2_visual_question: return p2_visual_question;
        case TemplateId::P3_segment_filter: return p3_segment_filter;
        case TemplateId::P4_answer: return p4_answer;
    }
    throw Error::internal("BadTemplateId", "unreachable");
}

std::map<std::string, std::string> TemplateSet::versions() const {
    return {{"P1_keywords", p1_keywords.version},
            {"P2_visual_question", p2_visual_question.version},
            {"P3_segment_filter", p3_segment_filter.version},
            {"P4_answer", p4_answer.version}};
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = make_builtin();
    return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    const auto load_as = [&](const char* file, TemplateId id) {
        auto t = PromptTemplate::load(dir / file);
        if (t.template_id != id) {
            throw Error::config("ParseError", std::string(file) + ": template id mismatch");
        }
        return t;
    };
    TemplateSet s;
    s.p1_keywords = load_as("p1_keywords.txt", TemplateId::P1_keywords);
    s.p2_visual_question = load_as("p2_visual_question.txt", TemplateId::P2_visual_question);
    s.p3_segment_filter = load_as("p3_segment_filter.txt", TemplateId::P3_segment_filter);
    s.p4_answer = load_as("p4_answer.txt", TemplateId::P4_answer);
    return s;
}

void TemplateSet::save_dir(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    p1_keywords.save(dir / "p1_keywords.txt");
    p2_visual_question.save(dir / "p2_visual_question.txt");
    p3_segment_filter.save(dir / "p3_segment_filter.txt");
    p4_answer.save(dir / "p4_answer.txt");
}

}  // namespace kfvqa
