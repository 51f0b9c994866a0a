#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diowave/io.hpp"

using namespace diowave;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/diowave_test_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  f << body;
}

}  // namespace

TEST_CASE("config parsing, overrides, typed getters") {
  const std::string path = temp_path("cfg.cfg");
  spit(path,
       "# comment line\n"
       "dim = 2\n"
       "radius=16   # trailing comment\n"
       "\n"
       "label = golden run\n"
       "eps = 5e-2\n"
       "flag = true\n");
  Config cfg = Config::load(path, {"radius=24", "extra=1.5"});

  CHECK(cfg.integer("dim") == 2);
  CHECK(cfg.integer("radius") == 24);  // override wins
  CHECK(cfg.str("label") == "golden run");
  CHECK(cfg.num("eps") == 0.05);
  CHECK(cfg.num("extra") == 1.5);
  CHECK(cfg.flag_or("flag", false));
  CHECK(cfg.flag_or("absent", true));
  CHECK(cfg.num_or("absent", 7.0) == 7.0);
  CHECK(cfg.integer_or("absent", 3) == 3);
  CHECK(cfg.str_or("absent", "x") == "x");
  CHECK(cfg.has("eps"));
  CHECK(!cfg.has("absent"));

  CHECK_THROWS_AS(cfg.str("missing"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.num("label"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.integer("eps"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.flag_or("label", false), std::invalid_argument);
  CHECK_THROWS_AS(Config::load(temp_path("nonexistent.cfg")), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_pairs({"no-equals-sign"}), std::invalid_argument);
  CHECK_THROWS_AS(Config::from_pairs({"=value"}), std::invalid_argument);

  spit(path, "eps = 1.5junk\n");
  Config bad = Config::load(path);
  CHECK_THROWS_AS(bad.num("eps"), std::invalid_argument);
}

TEST_CASE("matrix selection from config") {
  Config id = Config::from_pairs({"dim=2", "matrix=identity"});
  CHECK(matrix_from_config(id).entry(0, 0) == 1.0);
  CHECK(matrix_from_config(id).entry(0, 1) == 0.0);

  Config gold = Config::from_pairs({"dim=2", "matrix=golden"});
  DispersionMatrix g = matrix_from_config(gold);
  CHECK(g.entry(0, 1) == DispersionMatrix::golden_fixture(2).entry(0, 1));

  Config defaulted = Config::from_pairs({"dim=2"});
  CHECK(matrix_from_config(defaulted).entry(0, 1) == g.entry(0, 1));

  Config diag = Config::from_pairs({"dim=2", "matrix=diagonal", "matrix_entries=1.0, 0.24"});
  DispersionMatrix dm = matrix_from_config(diag);
  CHECK(dm.entry(0, 0) == 1.0);
  CHECK(dm.entry(1, 1) == 0.24);

  Config lit = Config::from_pairs(
      {"dim=2", "matrix=literal", "matrix_entries=2.0,0.5,0.5,3.0"});
  DispersionMatrix lm = matrix_from_config(lit);
  CHECK(lm.entry(0, 1) == 0.5);
  CHECK(lm.entry(1, 0) == 0.5);

  Config rnd = Config::from_pairs({"dim=3", "matrix=random", "matrix_seed=7"});
  DispersionMatrix rm = matrix_from_config(rnd);
  DispersionMatrix rm2 = matrix_from_config(rnd);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(rm.entry(i, j) == rm.entry(j, i));
      CHECK(rm.entry(i, j) == rm2.entry(i, j));  // seeded: reproducible
    }
  // B^T B + I/2 is positive definite; spot-check via a few quadratic forms.
  for (const Mode& n : {Mode{1, 0, 0}, Mode{1, -1, 0}, Mode{2, 1, -1}})
    CHECK(rm.eigenvalue_sq(n) > 0.0);

  CHECK_THROWS_AS(matrix_from_config(Config::from_pairs({"dim=2", "matrix=weird"})),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      matrix_from_config(Config::from_pairs(
          {"dim=2", "matrix=diagonal", "matrix_entries=1.0"})),
      std::invalid_argument);
}

TEST_CASE("analysis parameter validation") {
  AnalysisParams p = analysis_params(Config::from_pairs({}), 2);
  CHECK(p.s == 2.0);
  CHECK(p.theta == 0.2);
  CHECK(p.c_d == 0.5);
  CHECK(p.delta == 0.01);

  AnalysisParams q =
      analysis_params(Config::from_pairs({"s=3", "delta=0.02", "gamma=0.1"}), 2);
  CHECK(q.s == 3.0);
  CHECK(q.delta == 0.02);

  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"s=1.0"}), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"delta=0.1", "gamma=0.2"}), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"delta=0.3", "gamma=1.0"}), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"theta=1.0"}), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"theta=0"}), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(analysis_params(Config::from_pairs({"c_d=2.5"}), 2),
                  std::invalid_argument);
}

TEST_CASE("summary checks and JSON emission") {
  Summary s;
  s.scenario = "demo";
  CHECK(s.check_le("a", 0.5, 1.0));
  CHECK(!s.check_le("b", 2.0, 1.0));
  CHECK(s.check_ge("c", 2.0, 1.0));
  CHECK(s.check_in("d", 0.0, -1.0, 1.0));
  CHECK(!s.check_in("e", 2.0, -1.0, 1.0));
  CHECK(s.check_true("f", true, "note"));
  CHECK(!s.all_pass());

  const std::string path = temp_path("summary.json");
  save_summary_json(s, path);
  save_summary_json(s, temp_path("summary2.json"));
  CHECK(slurp(path) == slurp(temp_path("summary2.json")));

  nlohmann::json j = nlohmann::json::parse(slurp(path));
  CHECK(j["scenario"] == "demo");
  CHECK(j["pass"] == false);
  REQUIRE(j["checks"].size() == 6);
  CHECK(j["checks"][0]["id"] == "a");
  CHECK(j["checks"][0]["measured"] == 0.5);
  CHECK(j["checks"][0]["bound"] == 1.0);
  CHECK(j["checks"][0]["pass"] == true);
  CHECK(j["checks"][1]["pass"] == false);

  Summary empty;
  CHECK(empty.all_pass());  // no checks: vacuous pass
}

TEST_CASE("fixture round-trip and comparison") {
  const std::string path = temp_path("fix.kv");
  std::map<std::string, double> vals{
      {"count", 42.0}, {"ratio", 1.0 / 3.0}, {"tiny", 5.0e-13}};
  save_fixture(vals, path);
  CHECK(load_fixture(path) == vals);

  Summary ok;
  CHECK(compare_fixture(ok, vals, path, 1e-12));
  CHECK(ok.all_pass());
  REQUIRE(ok.checks.size() == 4);  // key-set check + one per key

  std::map<std::string, double> drifted = vals;
  drifted["ratio"] *= 1.0 + 1e-6;
  Summary bad;
  CHECK(!compare_fixture(bad, drifted, path, 1e-9));
  CHECK(!bad.all_pass());

  std::map<std::string, double> renamed{{"count", 42.0}, {"other", 1.0}};
  Summary keys;
  CHECK(!compare_fixture(keys, renamed, path, 1e-9));

  CHECK_THROWS_AS(load_fixture(temp_path("missing.kv")), std::runtime_error);
  spit(temp_path("broken.kv"), "just words\n");
  CHECK_THROWS_AS(load_fixture(temp_path("broken.kv")), std::runtime_error);
}

TEST_CASE("line fits recover exact laws") {
  std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y(5);
  for (std::size_t i = 0; i < 5; ++i) y[i] = 3.0 * x[i] - 2.0;
  LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(-2.0).epsilon(1e-13));

  // y = 4 x^{-1/2}: exact slope -1/2 in log-log space.
  std::vector<double> t{1.0, 2.0, 5.0, 10.0, 40.0};
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = 4.0 / std::sqrt(t[i]);
  LineFit g = fit_loglog(t, v);
  CHECK(g.slope == doctest::Approx(-0.5).epsilon(1e-13));
  CHECK(std::pow(10.0, g.intercept) == doctest::Approx(4.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_loglog(std::vector<double>{1.0, -2.0}, std::vector<double>{1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("svg plotter output") {
  PlotSpec spec;
  spec.title = "decay <test>";
  spec.xlabel = "t";
  spec.ylabel = "norm";
  spec.logx = spec.logy = true;
  Series a;
  a.label = "trace & fit";
  for (int i = 1; i <= 40; ++i) {
    a.x.push_back(double(i));
    a.y.push_back(2.0 / std::sqrt(double(i)));
  }
  spec.series.push_back(a);
  Series b;
  b.label = "with-bad-points";
  b.x = {1.0, -1.0, 10.0};
  b.y = {1.0, 5.0, 0.1};  // the negative-x point is dropped under logx
  spec.series.push_back(b);

  const std::string p1 = temp_path("plot1.svg"), p2 = temp_path("plot2.svg");
  save_svg_plot(spec, p1);
  save_svg_plot(spec, p2);
  const std::string body = slurp(p1);
  CHECK(body == slurp(p2));
  CHECK(body.find("<svg") == 0);
  CHECK(body.find("polyline") != std::string::npos);
  CHECK(body.find("decay &lt;test&gt;") != std::string::npos);
  CHECK(body.find("trace &amp; fit") != std::string::npos);
  CHECK(body.rfind("</svg>\n") == body.size() - 7);

  PlotSpec empty;
  empty.title = "empty";
  save_svg_plot(empty, temp_path("plot_empty.svg"));  // no series: frame only

  PlotSpec bad;
  Series s;
  s.x = {1.0};
  s.y = {1.0, 2.0};
  bad.series.push_back(s);
  CHECK_THROWS_AS(save_svg_plot(bad, temp_path("plot_bad.svg")),
                  std::invalid_argument);
}
