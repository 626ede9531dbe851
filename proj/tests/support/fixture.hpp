#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "kfvqa/domain.hpp"

namespace kfvqa::testing {

struct FixturePaths {
    std::filesystem::path dataset;
    std::filesystem::path corpus;
    std::filesystem::path mock_script;
    std::filesystem::path neighbors;
};

// Writes the 20-sample scripted fixture into `dir`. Four sample classes:
//   s01-s08  answer correctly on every path (s07/s08 with partial credit)
//   s09-s12  fixed by low-noise queries (verbose retrieval finds distractors)
//   s13-s16  fixed by segment filtering (raw documents carry misleading noise)
//   s17-s20  fixed by the confidence gate (any knowledge misleads them)
FixturePaths write_fixture(const std::filesystem::path& dir);

// Small knobs the fixture was engineered for.
PipelineConfig fixture_config();

// Mean accuracies frozen at fixture design time, in ablation row order
// (baseline, lnq, lnq_krf, lnq_krf_ski).
inline constexpr std::array<double, 4> kFixtureAblationMeans{0.39, 0.59, 0.79, 0.99};

}  // namespace kfvqa::testing
