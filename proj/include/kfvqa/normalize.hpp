#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace kfvqa {

// Token rewrite table for answer normalization: contraction repairs plus
// number-word-to-digit mappings, with article words dropped. Shipped as a
// versioned data file so behavior is pinned.
struct NormalizationTable {
    std::string version{"v1"};
    bool lowercase = true;
    bool collapse_whitespace = true;
    bool strip_punct = true;
    bool keep_word_apostrophe = true;
    bool keep_decimal_point = true;
    bool strip_thousands_comma = true;
    bool drop_articles = true;
    std::set<std::string> articles{"a", "an", "the"};
    std::map<std::string, std::string> token_map;

    bool operator==(const NormalizationTable&) const = default;

    static const NormalizationTable& builtin();
    static NormalizationTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

std::string normalize_answer(std::string_view raw, const NormalizationTable& table);
std::string normalize_answer(std::string_view raw);

struct AnswerText {
    std::string raw;
    std::string normalized;

    static AnswerText from_raw(std::string raw_text) {
        AnswerText a;
        a.normalized = normalize_answer(raw_text);
        a.raw = std::move(raw_text);
        return a;
    }
};

}  // namespace kfvqa
