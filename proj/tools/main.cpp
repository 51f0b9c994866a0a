// Scenario runner. Exit status: 0 every check passed, 1 a check failed,
// 2 configuration or IO error (including unknown scenario and bad flags).

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diowave/format.hpp"
#include "diowave/io.hpp"
#include "diowave/scenarios.hpp"

int main(int argc, char** argv) {
  CLI::App app{"deterministic experiment runner for the dispersive waveguide toolkit"};
  std::string scenario, config_path, out_dir;
  std::vector<std::string> overrides;
  std::string names;
  for (const std::string& n : diowave::scenario_names()) names += "\n  " + n;
  app.add_option("scenario", scenario, "one of:" + names)->required();
  app.add_option("--config", config_path, "key=value configuration file")->required();
  app.add_option("--set", overrides, "override or add key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory for CSV/SVG/summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const diowave::Config cfg = diowave::Config::load(config_path, overrides);
    const diowave::Summary s = diowave::run_scenario_report(scenario, cfg, out_dir);
    for (const auto& c : s.checks)
      std::printf("[%s] %s measured=%s bound=%s%s%s\n", c.pass ? "PASS" : "FAIL",
                  c.id.c_str(), diowave::fmt_g17(c.measured).c_str(),
                  diowave::fmt_g17(c.bound).c_str(), c.note.empty() ? "" : " ",
                  c.note.c_str());
    std::printf("%s: %s (%zu checks, artifacts in %s)\n", s.scenario.c_str(),
                s.all_pass() ? "PASS" : "FAIL", s.checks.size(), out_dir.c_str());
    return s.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
