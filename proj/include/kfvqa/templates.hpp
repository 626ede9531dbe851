#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace kfvqa {

enum class TemplateId { P1_keywords, P2_visual_question, P3_segment_filter, P4_answer };

std::string template_id_name(TemplateId id);
TemplateId template_id_from_name(const std::string& name);

// A prompt template with named `{placeholder}` slots. Placeholders are
// declared up front; rendering is literal single-pass substitution.
struct PromptTemplate {
    TemplateId template_id = TemplateId::P1_keywords;
    std::string body;
    std::string version{"v1"};
    std::set<std::string> placeholders;

    static PromptTemplate load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings);

struct TemplateSet {
    PromptTemplate p1_keywords;
    PromptTemplate p2_visual_question;
    PromptTemplate p3_segment_filter;
    PromptTemplate p4_answer;

    const PromptTemplate& get(TemplateId id) const;
    std::map<std::string, std::string> versions() const;

    static const TemplateSet& builtin();
    static TemplateSet load_dir(const std::filesystem::path& dir);
    void save_dir(const std::filesystem::path& dir) const;
};

}  // namespace kfvqa
