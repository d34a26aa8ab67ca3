// scenario.hpp — Declarative scenario files and the run engine behind the
// CLI: parse/validate a scenario, dispatch to the matching module operation,
// attach the module's invariant checks to the result, and render the report
// as JSON (17 significant digits, byte-reproducible for a fixed seed) or
// human-readable text (6 significant digits).

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "checks.hpp"
#include "json_io.hpp"

namespace qme::scenario {

using json_io::Json;

enum class Kind {
    kClassicalMaxent,
    kClassicalBayes,
    kClassicalJeffrey,
    kQMaxent,
    kPdmtSweep,
    kQbr,
    kQjr,
    kCollapse,
    kWeakCollapse,
    kThermal,
    kReprior,
};

const char* kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

struct Scenario {
    Kind kind = Kind::kQMaxent;
    Json inputs;
    std::optional<std::uint64_t> seed;
    Json raw;  // full document, echoed into the report
};

Scenario parse_scenario(const Json& document);
Scenario load_scenario(const std::string& path);

// CLI-level solver overrides, applied on top of any options in the file.
struct Overrides {
    std::optional<double> dual_tol;
    std::optional<int> max_iter;
    std::optional<double> damping;
};

struct RunReport {
    Json json;               // full report; wall_time is the final key
    bool all_checks_passed = false;
};

RunReport run_scenario(const Scenario& scenario, const Overrides& overrides = {});
RunReport run_scenario_file(const std::string& path, const Overrides& overrides = {});

// Parse + dimensional validation only; returns {"valid": true, "kind": ...}.
Json validate_scenario(const Json& document);

struct SelftestOptions {
    std::vector<int> dims{2, 3, 4};
    int trials = 50;
    std::uint64_t seed = 0;
};

RunReport run_selftest(const SelftestOptions& options);

// Solve-request entry point (the `qme solve` verb): wraps the request into a
// qmaxent scenario.
RunReport run_solve_request(const Json& request, const Overrides& overrides = {});

// Human-readable rendering of any report produced above.
std::string render_text(const Json& report);

}  // namespace qme::scenario
