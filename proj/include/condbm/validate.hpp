#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "condbm/rng.hpp"

namespace condbm {

// One acceptance criterion outcome. observed is the headline statistic (the
// quantity compared against tolerance); detail carries the remaining
// measurements as text for the report.
struct CriterionResult {
    int id = 0;
    std::string name;
    std::string target;
    double observed = 0.0;
    std::string tolerance;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

struct ValidateOptions {
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;          // 0: hardware concurrency
    std::string suite = "all";     // all | analytic | meander | flows | determinism
};

// Runs the selected suite (analytic: 1-3, meander: 4-7, flows: 8-11,
// determinism: 12), printing one "PASS name ..." / "FAIL name ..." line per
// criterion to log as it completes. Statistical criteria are deterministic
// given options.seed.
std::vector<CriterionResult> run_acceptance(const ValidateOptions& options,
                                            std::ostream& log);

nlohmann::json acceptance_report_json(const std::vector<CriterionResult>& results);

// 0 when everything passed, else 3 + number of failures, capped at 125
// (validation failures occupy 4..125 of the exit-code convention).
int acceptance_exit_code(const std::vector<CriterionResult>& results);

} // namespace condbm
