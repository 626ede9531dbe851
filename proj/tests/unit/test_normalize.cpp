#include <doctest.h>

#include <cstdlib>
#include <random>

#include "kfvqa/normalize.hpp"

using namespace kfvqa;

TEST_SUITE("normalize") {

TEST_CASE("lowercase, article and punctuation rules") {
    CHECK(normalize_answer("The Autumn.") == "autumn");
    CHECK(normalize_answer("A dog") == "dog");
    CHECK(normalize_answer("An Apple!") == "apple");
    CHECK(normalize_answer("surf-board") == "surf board");
}

TEST_CASE("whitespace collapse") {
    CHECK(normalize_answer("  taxi   cab ") == "taxi cab");
    CHECK(normalize_answer("\ttaxi\ncab\t") == "taxi cab");
}

TEST_CASE("number words map to digits per the standard table") {
    CHECK(normalize_answer("two") == "2");
    CHECK(normalize_answer("Ten") == "10");
    CHECK(normalize_answer("none") == "0");
    CHECK(normalize_answer("one dog") == "1 dog");
}

TEST_CASE("apostrophes inside words are kept, contractions repaired") {
    CHECK(normalize_answer("don't") == "don't");
    CHECK(normalize_answer("dont") == "don't");
    CHECK(normalize_answer("o'clock") == "o'clock");
    CHECK(normalize_answer("'quoted'") == "quoted");
}

TEST_CASE("digits keep decimal points, lose thousands commas") {
    CHECK(normalize_answer("3.5") == "3.5");
    CHECK(normalize_answer("1,000") == "1000");
    CHECK(normalize_answer("end.") == "end");
    CHECK(normalize_answer("a.m.") == "am");
}

TEST_CASE("empty and degenerate inputs") {
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("   ") == "");
    CHECK(normalize_answer("the a an") == "");
    CHECK(normalize_answer("?!.") == "");
}

TEST_CASE("idempotence on table entries and random strings") {
    const auto& table = NormalizationTable::builtin();
    for (const auto& [from, to] : table.token_map) {
        CHECK(normalize_answer(normalize_answer(from)) == normalize_answer(from));
        CHECK(normalize_answer(to) == to);
    }

    std::mt19937 rng(42);
    const std::string alphabet = "abcZ '.,-019?\t";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 24);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string input;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) input.push_back(alphabet[pick(rng)]);
        const std::string once = normalize_answer(input);
        CHECK(normalize_answer(once) == once);
    }
}

TEST_CASE("shipped table file matches the builtin") {
    const char* root = std::getenv("KFVQA_SOURCE_DIR");
    if (root == nullptr) root = KFVQA_SOURCE_DIR;
    const auto loaded = NormalizationTable::load(
        std::filesystem::path(root) / "data" / "normalization" / "vqa_norm_v1.tsv");
    CHECK(loaded == NormalizationTable::builtin());
}

TEST_CASE("table file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "kfvqa_norm_rt.tsv";
    NormalizationTable::builtin().save(path);
    CHECK(NormalizationTable::load(path) == NormalizationTable::builtin());
    std::filesystem::remove(path);
}

}  // TEST_SUITE
