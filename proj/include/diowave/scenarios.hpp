#pragma once
// Named experiments wiring the numerical modules together. Each scenario
// validates its configuration, writes CSV/SVG artifacts plus summary.json
// under the output directory, and returns the summary; run_scenario maps the
// result to a process exit status (0 all checks pass, 1 check failure).
// Configuration and IO errors propagate as exceptions for the CLI to map to
// status 2. Identical configs give byte-identical CSVs.

#include <string>
#include <vector>

#include "diowave/io.hpp"

namespace diowave {

const std::vector<std::string>& scenario_names();

Summary scenario_admissibility_scan(const Config& cfg, const std::string& out);
Summary scenario_cluster_report(const Config& cfg, const std::string& out);
Summary scenario_resonance_census(const Config& cfg, const std::string& out);
Summary scenario_divisor_ledger(const Config& cfg, const std::string& out);
Summary scenario_effective_run(const Config& cfg, const std::string& out);
Summary scenario_full_vs_effective(const Config& cfg, const std::string& out);
Summary scenario_nls_run(const Config& cfg, const std::string& out);
Summary scenario_scattering_compare(const Config& cfg, const std::string& out);
Summary scenario_dispersive_check(const Config& cfg, const std::string& out);

// Creates the output directory, dispatches by name, writes summary.json.
Summary run_scenario_report(const std::string& name, const Config& cfg,
                            const std::string& out);

// Same, mapped to a process exit status: 0 all checks pass, 1 otherwise.
int run_scenario(const std::string& name, const Config& cfg, const std::string& out);

}  // namespace diowave
