#include "kfvqa/normalize.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"

namespace kfvqa {

namespace {

NormalizationTable make_builtin() {
    NormalizationTable t;
    // Number words of the standard VQA preprocessing map.
    t.token_map = {
        {"none", "0"}, {"zero", "0"}, {"one", "1"}, {"two", "2"},   {"three", "3"}, {"four", "4"},
        {"five", "5"}, {"six", "6"},  {"seven", "7"}, {"eight", "8"}, {"nine", "9"},  {"ten", "10"},
    };
    // Contraction repairs. Values are lowercased so normalized text stays
    // lowercase throughout.
    const std::pair<const char*, const char*> contractions[] = {
        {"aint", "ain't"},
        {"arent", "aren't"},
        {"cant", "can't"},
        {"couldve", "could've"},
        {"couldnt", "couldn't"},
        {"couldn'tve", "couldn't've"},
        {"couldnt've", "couldn't've"},
        {"didnt", "didn't"},
        {"doesnt", "doesn't"},
        {"dont", "don't"},
        {"hadnt", "hadn't"},
        {"hadnt've", "hadn't've"},
        {"hadn'tve", "hadn't've"},
        {"hasnt", "hasn't"},
        {"havent", "haven't"},
        {"hed", "he'd"},
        {"hed've", "he'd've"},
        {"he'dve", "he'd've"},
        {"hes", "he's"},
        {"howd", "how'd"},
        {"howll", "how'll"},
        {"hows", "how's"},
        {"id've", "i'd've"},
        {"i'dve", "i'd've"},
        {"im", "i'm"},
        {"ive", "i've"},
        {"isnt", "isn't"},
        {"itd", "it'd"},
        {"itd've", "it'd've"},
        {"it'dve", "it'd've"},
        {"itll", "it'll"},
        {"let's", "let's"},
        {"maam", "ma'am"},
        {"mightnt", "mightn't"},
        {"mightnt've", "mightn't've"},
        {"mightn'tve", "mightn't've"},
        {"mightve", "might've"},
        {"mustnt", "mustn't"},
        {"mustve", "must've"},
        {"neednt", "needn't"},
        {"notve", "not've"},
        {"oclock", "o'clock"},
        {"oughtnt", "oughtn't"},
        {"ow's'at", "'ow's'at"},
        {"'ows'at", "'ow's'at"},
        {"'ow'sat", "'ow's'at"},
        {"shant", "shan't"},
        {"shed've", "she'd've"},
        {"she'dve", "she'd've"},
        {"she's", "she's"},
        {"shouldve", "should've"},
        {"shouldnt", "shouldn't"},
        {"shouldnt've", "shouldn't've"},
        {"shouldn'tve", "shouldn't've"},
        {"somebodyd", "somebody'd"},
        {"somebodyd've", "somebody'd've"},
        {"somebody'dve", "somebody'd've"},
        {"somebodyll", "somebody'll"},
        {"somebodys", "somebody's"},
        {"someoned", "someone'd"},
        {"someoned've", "someone'd've"},
        {"someone'dve", "someone'd've"},
        {"someonell", "someone'll"},
        {"someones", "someone's"},
        {"somethingd", "something'd"},
        {"somethingd've", "something'd've"},
        {"something'dve", "something'd've"},
        {"somethingll", "something'll"},
        {"thats", "that's"},
        {"thered", "there'd"},
        {"thered've", "there'd've"},
        {"there'dve", "there'd've"},
        {"therere", "there're"},
        {"theres", "there's"},
        {"theyd", "they'd"},
        {"theyd've", "they'd've"},
        {"they'dve", "they'd've"},
        {"theyll", "they'll"},
        {"theyre", "they're"},
        {"theyve", "they've"},
        {"twas", "'twas"},
        {"wasnt", "wasn't"},
        {"wed've", "we'd've"},
        {"we'dve", "we'd've"},
        {"weve", "we've"},
        {"werent", "weren't"},
        {"whatll", "what'll"},
        {"whatre", "what're"},
        {"whats", "what's"},
        {"whatve", "what've"},
        {"whens", "when's"},
        {"whered", "where'd"},
        {"wheres", "where's"},
        {"whereve", "where've"},
        {"whod", "who'd"},
        {"whod've", "who'd've"},
        {"who'dve", "who'd've"},
        {"wholl", "who'll"},
        {"whos", "who's"},
        {"whove", "who've"},
        {"whyll", "why'll"},
        {"whyre", "why're"},
        {"whys", "why's"},
        {"wont", "won't"},
        {"wouldve", "would've"},
        {"wouldnt", "wouldn't"},
        {"wouldnt've", "wouldn't've"},
        {"wouldn'tve", "wouldn't've"},
        {"yall", "y'all"},
        {"yall'll", "y'all'll"},
        {"y'allll", "y'all'll"},
        {"yall'd've", "y'all'd've"},
        {"y'alld've", "y'all'd've"},
        {"y'all'dve", "y'all'd've"},
        {"youd", "you'd"},
        {"youd've", "you'd've"},
        {"you'dve", "you'd've"},
        {"youll", "you'll"},
        {"youre", "you're"},
        {"youve", "you've"},
    };
    for (const auto& [from, to] : contractions) t.token_map.emplace(from, to);
    return t;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const NormalizationTable& NormalizationTable::builtin() {
    static const NormalizationTable table = make_builtin();
    return table;
}

NormalizationTable NormalizationTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error::data("FileMissing", "cannot open " + path.string());
    }
    NormalizationTable t;
    t.token_map.clear();
    t.articles.clear();
    t.lowercase = t.collapse_whitespace = t.strip_punct = false;
    t.keep_word_apostrophe = t.keep_decimal_point = t.strip_thousands_comma = false;
    t.drop_articles = false;
    t.version.clear();

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hdr(line.substr(1));
            std::string word;
            hdr >> word;
            if (word == "vqa-normalization") {
                hdr >> t.version;
            } else if (word == "flags:") {
                while (hdr >> word) {
                    if (word == "lowercase") t.lowercase = true;
                    else if (word == "collapse_whitespace") t.collapse_whitespace = true;
                    else if (word == "strip_punct") t.strip_punct = true;
                    else if (word == "keep_word_apostrophe") t.keep_word_apostrophe = true;
                    else if (word == "keep_decimal_point") t.keep_decimal_point = true;
                    else if (word == "strip_thousands_comma") t.strip_thousands_comma = true;
                    else if (word == "drop_articles") t.drop_articles = true;
                    else throw Error::data("ParseError", path.string() + ":" +
                                           std::to_string(line_no) + ": unknown flag " + word);
                }
            } else if (word == "articles:") {
                while (hdr >> word) t.articles.insert(word);
            }
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error::data("ParseError", path.string() + ":" + std::to_string(line_no) +
                              ": expected from<TAB>to");
        }
        t.token_map[line.substr(0, tab)] = line.substr(tab + 1);
    }
    if (t.version.empty()) {
        throw Error::data("ParseError", path.string() + ": missing version header");
    }
    return t;
}

void NormalizationTable::save(const std::filesystem::path& path) const {
    std::ostringstream out;
    out << "# vqa-normalization " << version << "\n";
    out << "# flags:";
    if (lowercase) out << " lowercase";
    if (collapse_whitespace) out << " collapse_whitespace";
    if (strip_punct) out << " strip_punct";
    if (keep_word_apostrophe) out << " keep_word_apostrophe";
    if (keep_decimal_point) out << " keep_decimal_point";
    if (strip_thousands_comma) out << " strip_thousands_comma";
    if (drop_articles) out << " drop_articles";
    out << "\n# articles:";
    for (const auto& a : articles) out << " " << a;
    out << "\n";
    for (const auto& [from, to] : token_map) out << from << "\t" << to << "\n";
    atomic_write_file(path, out.str());
}

std::string normalize_answer(std::string_view raw, const NormalizationTable& table) {
    std::string text(raw);
    if (table.lowercase) {
        for (auto& c : text) c = char(std::tolower(static_cast<unsigned char>(c)));
    }

    std::string depunct;
    depunct.reserve(text.size());
    if (table.strip_punct) {
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char c = text[i];
            const char prev = i > 0 ? text[i - 1] : '\0';
            const char next = i + 1 < text.size() ? text[i + 1] : '\0';
            if (c == '\'') {
                if (table.keep_word_apostrophe && is_word_char(prev) && is_word_char(next)) {
                    depunct.push_back(c);
                }
                // dropped without a space otherwise
            } else if (c == '.') {
                if (table.keep_decimal_point && is_digit(prev) && is_digit(next)) {
                    depunct.push_back(c);
                }
                // periods vanish without splitting the word ("a.m." -> "am")
            } else if (c == ',') {
                if (table.strip_thousands_comma && is_digit(prev) && is_digit(next)) {
                    continue;  // "1,000" -> "1000"
                }
                depunct.push_back(' ');
            } else if (std::ispunct(static_cast<unsigned char>(c))) {
                depunct.push_back(' ');
            } else {
                depunct.push_back(c);
            }
        }
    } else {
        depunct = text;
    }

    std::istringstream words(depunct);
    std::string word;
    std::string out;
    while (words >> word) {
        const auto it = table.token_map.find(word);
        const std::string& mapped = it != table.token_map.end() ? it->second : word;
        if (table.drop_articles && table.articles.count(mapped)) continue;
        if (!out.empty()) out.push_back(' ');
        out += mapped;
    }
    return out;
}

std::string normalize_answer(std::string_view raw) {
    return normalize_answer(raw, NormalizationTable::builtin());
}

}  // namespace kfvqa
