#include <doctest.h>

#include <filesystem>

#include "kfvqa/errors.hpp"
#include "kfvqa/io.hpp"
#include "kfvqa/runio.hpp"

using namespace kfvqa;

TEST_SUITE("runio") {

TEST_CASE("ini files parse into sectioned keys") {
    const auto path = std::filesystem::temp_directory_path() / "kfvqa_cfg.ini";
    atomic_write_file(path,
                      "# comment\n"
                      "[pipeline]\n"
                      "r = 5\n"
                      "tau = 0.5\n"
                      "ski = off\n"
                      "[backend]\n"
                      "kind = mock\n"
                      "mock_script = rules.jsonl\n"
                      "[run]\n"
                      "jobs = 3\n");
    const auto entries = parse_ini(path);
    CHECK(entries.at("pipeline.r") == "5");
    CHECK(entries.at("backend.kind") == "mock");

    RunSettings settings;
    apply_ini(entries, settings);
    CHECK(settings.pipeline.r == 5);
    CHECK(settings.pipeline.tau == 0.5);
    CHECK_FALSE(settings.pipeline.stages.ski);
    CHECK(settings.pipeline.h == 7);  // untouched defaults stay
    CHECK(settings.backend.mock_script == "rules.jsonl");
    CHECK(settings.jobs == 3);
    std::filesystem::remove(path);
}

TEST_CASE("unknown keys and bad values are config errors") {
    RunSettings settings;
    CHECK_THROWS_AS(apply_ini({{"pipeline.bogus", "1"}}, settings), Error);
    CHECK_THROWS_AS(apply_ini({{"pipeline.r", "many"}}, settings), Error);
    CHECK_THROWS_AS(apply_ini({{"pipeline.ski", "maybe"}}, settings), Error);
}

TEST_CASE("effective defaults with no overrides match the published setup") {
    const RunSettings settings;
    CHECK(settings.pipeline.r == 20);
    CHECK(settings.pipeline.h == 7);
    CHECK(settings.pipeline.tau == 0.8);
    CHECK(settings.pipeline.m == 5);
    CHECK(settings.pipeline.n == 10);
}

}  // TEST_SUITE
