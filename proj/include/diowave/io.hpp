#pragma once
// Experiment plumbing: key=value configs with flag overrides, pass/fail
// summaries (JSON), fixture record/compare, least-squares fits, and a small
// deterministic SVG plotter. Everything here formats numbers through one
// round-trip routine so identical inputs give identical bytes.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diowave/lattice.hpp"

namespace diowave {

// Flat key=value file: one pair per line, '#' starts a comment, blank lines
// ignored. Overrides are "key=value" strings that replace or add entries.
class Config {
 public:
  static Config load(const std::string& path,
                     const std::vector<std::string>& overrides = {});
  static Config from_pairs(const std::vector<std::string>& pairs);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;             // throws if absent
  std::string str_or(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key) const;                  // throws if absent
  double num_or(const std::string& key, double fallback) const;
  int integer(const std::string& key) const;
  int integer_or(const std::string& key, int fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;  // true/false/1/0

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// Matrix selection: "matrix" is "identity", "golden", "diagonal", "literal",
// or "random"; the diagonal form reads d comma-separated entries from
// "matrix_entries", "literal" reads d*d row-major entries from the same key,
// and "random" builds a seeded positive-definite B^T B + I/2 from
// "matrix_seed". "dim" is required.
DispersionMatrix matrix_from_config(const Config& cfg);

// Shared analysis-parameter constraints, re-validated at load:
// s > d/2, 3*delta < gamma, delta < 1/4, theta in (0,1).
// Missing keys fall back to the desk defaults (s=2, sigma=0.1, delta=0.01,
// gamma=0.2, theta=0.2, tau=3, c_d=0.5). Throws std::invalid_argument.
struct AnalysisParams {
  double s = 2.0, sigma = 0.1, delta = 0.01, gamma = 0.2;
  double theta = 0.2, tau = 3.0, c_d = 0.5;
};
AnalysisParams analysis_params(const Config& cfg, int dim);

struct CheckResult {
  std::string id;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string note;  // free-form context, e.g. the comparison direction
};

struct Summary {
  std::string scenario;
  std::vector<CheckResult> checks;

  bool all_pass() const;
  // Convenience builders returning the stored pass flag.
  bool check_le(const std::string& id, double measured, double bound,
                const std::string& note = "");
  bool check_ge(const std::string& id, double measured, double bound,
                const std::string& note = "");
  bool check_in(const std::string& id, double measured, double lo, double hi);
  bool check_true(const std::string& id, bool condition, const std::string& note = "");
};

// JSON object: {"scenario": ..., "pass": ..., "checks": [{id, measured,
// bound, pass, note}, ...]}. Key order is fixed; doubles round-trip.
void save_summary_json(const Summary& s, const std::string& path);

// Scalar fixture store, one "name=value" per line in sorted order.
void save_fixture(const std::map<std::string, double>& values, const std::string& path);
std::map<std::string, double> load_fixture(const std::string& path);

// Compares measured values against a stored fixture with relative tolerance
// rtol (absolute below 1e-300). Appends one check per key plus one for the
// key sets matching. Returns true when everything matched.
bool compare_fixture(Summary& s, const std::map<std::string, double>& measured,
                     const std::string& path, double rtol);

// Least-squares line y = slope*x + intercept; requires >= 2 points.
struct LineFit {
  double slope = 0.0, intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);
// Fit in log10-log10 space; skips nothing, throws on non-positive entries.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

// Minimal SVG line plot: framed axes, ticks, legend, optional log10 axes.
// Layout is fixed (860x520), colors cycle through a built-in palette.
struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  bool logx = false, logy = false;
  std::vector<Series> series;
};

void save_svg_plot(const PlotSpec& spec, const std::string& path);

}  // namespace diowave
