#include "diowave/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "diowave/format.hpp"
#include "diowave/rng.hpp"

namespace diowave {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void insert_pair(std::map<std::string, std::string>& kv, const std::string& line,
                 const std::string& where) {
  const std::size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: missing '=' in \"" + line + "\" (" + where + ")");
  const std::string key = trim(line.substr(0, eq));
  const std::string val = trim(line.substr(eq + 1));
  if (key.empty())
    throw std::invalid_argument("config: empty key in \"" + line + "\" (" + where + ")");
  kv[key] = val;
}

double parse_num(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(val, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key \"" + key + "\" is not numeric: \"" + val + "\"");
  }
  if (used != val.size())
    throw std::invalid_argument("config: key \"" + key + "\" has trailing junk: \"" + val + "\"");
  return v;
}

}  // namespace

Config Config::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  Config cfg;
  std::string line;
  while (std::getline(f, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    insert_pair(cfg.kv_, line, path);
  }
  for (const std::string& o : overrides) insert_pair(cfg.kv_, o, "--set");
  return cfg;
}

Config Config::from_pairs(const std::vector<std::string>& pairs) {
  Config cfg;
  for (const std::string& p : pairs) insert_pair(cfg.kv_, p, "from_pairs");
  return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::invalid_argument("config: missing key \"" + key + "\"");
  return it->second;
}

std::string Config::str_or(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::num(const std::string& key) const { return parse_num(key, str(key)); }

double Config::num_or(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_num(key, it->second);
}

int Config::integer(const std::string& key) const {
  const double v = num(key);
  const int i = int(std::llround(v));
  if (double(i) != v)
    throw std::invalid_argument("config: key \"" + key + "\" is not an integer");
  return i;
}

int Config::integer_or(const std::string& key, int fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool Config::flag_or(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key \"" + key + "\" is not a boolean: \"" + v + "\"");
}

namespace {

std::vector<double> parse_entry_list(const std::string& raw, std::size_t expect,
                                     const char* what) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_num("matrix_entries", item));
  }
  if (out.size() != expect)
    throw std::invalid_argument(std::string("config: matrix_entries needs ") +
                                std::to_string(expect) + " values for " + what);
  return out;
}

}  // namespace

DispersionMatrix matrix_from_config(const Config& cfg) {
  const int d = cfg.integer("dim");
  const std::string kind = cfg.str_or("matrix", "golden");
  if (kind == "identity") return DispersionMatrix::identity(d);
  if (kind == "golden") return DispersionMatrix::golden_fixture(d);
  if (kind == "diagonal") {
    const std::vector<double> e =
        parse_entry_list(cfg.str("matrix_entries"), std::size_t(d), "the diagonal");
    return DispersionMatrix::diagonal(e);
  }
  if (kind == "literal") {
    const std::vector<double> e = parse_entry_list(
        cfg.str("matrix_entries"), std::size_t(d) * std::size_t(d), "a full matrix");
    return DispersionMatrix(d, e);
  }
  if (kind == "random") {
    // B^T B + I/2: symmetric (products commute entrywise) and positive definite.
    std::mt19937_64 g(std::uint64_t(cfg.integer_or("matrix_seed", 1)));
    std::vector<double> b(std::size_t(d) * std::size_t(d));
    for (double& v : b) v = uniform_range(g, -1.0, 1.0);
    std::vector<double> a(std::size_t(d) * std::size_t(d), 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = i == j ? 0.5 : 0.0;
        for (int k = 0; k < d; ++k)
          s += b[std::size_t(k) * std::size_t(d) + std::size_t(i)] *
               b[std::size_t(k) * std::size_t(d) + std::size_t(j)];
        a[std::size_t(i) * std::size_t(d) + std::size_t(j)] = s;
      }
    return DispersionMatrix(d, a);
  }
  throw std::invalid_argument("config: unknown matrix kind \"" + kind + "\"");
}

AnalysisParams analysis_params(const Config& cfg, int dim) {
  AnalysisParams p;
  p.s = cfg.num_or("s", p.s);
  p.sigma = cfg.num_or("sigma", p.sigma);
  p.delta = cfg.num_or("delta", p.delta);
  p.gamma = cfg.num_or("gamma", p.gamma);
  p.theta = cfg.num_or("theta", p.theta);
  p.tau = cfg.num_or("tau", p.tau);
  p.c_d = cfg.num_or("c_d", p.c_d);
  if (!(p.s > 0.5 * double(dim)))
    throw std::invalid_argument("config: need s > d/2");
  if (!(3.0 * p.delta < p.gamma))
    throw std::invalid_argument("config: need 3*delta < gamma");
  if (!(p.delta < 0.25)) throw std::invalid_argument("config: need delta < 1/4");
  if (!(p.theta > 0.0 && p.theta < 1.0))
    throw std::invalid_argument("config: need theta in (0,1)");
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("config: need sigma >= 0");
  if (!(p.tau > 0.0)) throw std::invalid_argument("config: need tau > 0");
  if (!(p.c_d > 0.0 && p.c_d <= 2.0))
    throw std::invalid_argument("config: need c_d in (0,2]");
  return p;
}

bool Summary::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

bool Summary::check_le(const std::string& id, double measured, double bound,
                       const std::string& note) {
  const bool ok = measured <= bound;
  checks.push_back({id, measured, bound, ok, note.empty() ? "measured <= bound" : note});
  return ok;
}

bool Summary::check_ge(const std::string& id, double measured, double bound,
                       const std::string& note) {
  const bool ok = measured >= bound;
  checks.push_back({id, measured, bound, ok, note.empty() ? "measured >= bound" : note});
  return ok;
}

bool Summary::check_in(const std::string& id, double measured, double lo, double hi) {
  const bool ok = measured >= lo && measured <= hi;
  checks.push_back({id, measured, hi, ok,
                    "measured in [" + fmt_g17(lo) + ", " + fmt_g17(hi) + "]"});
  return ok;
}

bool Summary::check_true(const std::string& id, bool condition, const std::string& note) {
  checks.push_back({id, condition ? 1.0 : 0.0, 1.0, condition,
                    note.empty() ? "condition holds" : note});
  return condition;
}

void save_summary_json(const Summary& s, const std::string& path) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["pass"] = s.all_pass();
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const CheckResult& c : s.checks) {
    nlohmann::ordered_json e;
    e["id"] = c.id;
    e["measured"] = c.measured;
    e["bound"] = c.bound;
    e["pass"] = c.pass;
    e["note"] = c.note;
    arr.push_back(std::move(e));
  }
  j["checks"] = std::move(arr);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

void save_fixture(const std::map<std::string, double>& values, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-fixture,v1\n";
  for (const auto& [k, v] : values) f << k << "=" << fmt_g17(v) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::map<std::string, double> load_fixture(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read fixture " + path);
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(f, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("fixture: malformed line \"" + line + "\" in " + path);
    out[trim(line.substr(0, eq))] = parse_num("fixture", trim(line.substr(eq + 1)));
  }
  return out;
}

bool compare_fixture(Summary& s, const std::map<std::string, double>& measured,
                     const std::string& path, double rtol) {
  const std::map<std::string, double> stored = load_fixture(path);
  bool all = true;
  all &= s.check_true("fixture.keys", stored.size() == measured.size(),
                      "stored and measured key sets match");
  for (const auto& [k, v] : measured) {
    auto it = stored.find(k);
    if (it == stored.end()) {
      all &= s.check_true("fixture." + k, false, "key missing from stored fixture");
      continue;
    }
    const double ref = it->second;
    const double denom = std::max(std::fabs(ref), 1e-300);
    const double rel = std::fabs(v - ref) / denom;
    all &= s.check_le("fixture." + k, rel, rtol,
                      "relative deviation from stored " + fmt_g17(ref));
  }
  return all;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need two equal-length samples");
  const double n = double(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw std::invalid_argument("fit_line: degenerate abscissa");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy * sxx - sx * sxy) / det;
  return f;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_loglog: non-positive sample");
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
  }
  return fit_line(lx, ly);
}

namespace {

// Fixed two-decimal pixel coordinates keep the output byte-stable.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

constexpr const char* kPalette[6] = {"#1f6fb2", "#d1495b", "#2e8b57",
                                     "#8e5fa8", "#c47f17", "#3b3b3b"};

}  // namespace

void save_svg_plot(const PlotSpec& spec, const std::string& path) {
  const double W = 860.0, H = 520.0;
  const double ml = 78.0, mr = 24.0, mt = 46.0, mb = 56.0;
  const double pw = W - ml - mr, ph = H - mt - mb;

  // Data ranges after the optional log transforms; empty plots get [0,1].
  auto tr = [](bool lg, double v) { return lg ? std::log10(v) : v; };
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool seen = false;
  for (const Series& s : spec.series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("svg: series \"" + s.label + "\" length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if ((spec.logx && !(s.x[i] > 0.0)) || (spec.logy && !(s.y[i] > 0.0))) continue;
      const double xv = tr(spec.logx, s.x[i]), yv = tr(spec.logy, s.y[i]);
      if (!seen) {
        xmin = xmax = xv;
        ymin = ymax = yv;
        seen = true;
      } else {
        xmin = std::min(xmin, xv);
        xmax = std::max(xmax, xv);
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    }
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto X = [&](double v) { return ml + (tr(spec.logx, v) - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double v) { return mt + ph - (tr(spec.logy, v) - ymin) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(W)
    << "\" height=\"" << int(H) << "\" viewBox=\"0 0 " << int(W) << " " << int(H)
    << "\">\n";
  o << "<rect width=\"" << int(W) << "\" height=\"" << int(H)
    << "\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"" << px(W / 2) << "\" y=\"26\" text-anchor=\"middle\" "
       "font-family=\"monospace\" font-size=\"16\">"
    << xml_escape(spec.title) << "</text>\n";

  // Frame, ticks, grid: five divisions per axis in transformed space.
  o << "<rect x=\"" << px(ml) << "\" y=\"" << px(mt) << "\" width=\"" << px(pw)
    << "\" height=\"" << px(ph) << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    const double gx = ml + pw * i / 5.0;
    const double gy = mt + ph - ph * i / 5.0;
    if (i > 0 && i < 5) {
      o << "<line x1=\"" << px(gx) << "\" y1=\"" << px(mt) << "\" x2=\"" << px(gx)
        << "\" y2=\"" << px(mt + ph) << "\" stroke=\"#dddddd\"/>\n";
      o << "<line x1=\"" << px(ml) << "\" y1=\"" << px(gy) << "\" x2=\"" << px(ml + pw)
        << "\" y2=\"" << px(gy) << "\" stroke=\"#dddddd\"/>\n";
    }
    const double xv = spec.logx ? std::pow(10.0, fx) : fx;
    const double yv = spec.logy ? std::pow(10.0, fy) : fy;
    o << "<text x=\"" << px(gx) << "\" y=\"" << px(mt + ph + 18)
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
      << tick_label(xv) << "</text>\n";
    o << "<text x=\"" << px(ml - 8) << "\" y=\"" << px(gy + 4)
      << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
      << tick_label(yv) << "</text>\n";
  }
  o << "<text x=\"" << px(ml + pw / 2) << "\" y=\"" << px(H - 14)
    << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\">"
    << xml_escape(spec.xlabel) << "</text>\n";
  o << "<text x=\"18\" y=\"" << px(mt + ph / 2)
    << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\" "
       "transform=\"rotate(-90 18 "
    << px(mt + ph / 2) << ")\">" << xml_escape(spec.ylabel) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const Series& s = spec.series[si];
    const char* color = kPalette[si % 6];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if ((spec.logx && !(s.x[i] > 0.0)) || (spec.logy && !(s.y[i] > 0.0))) continue;
      if (!first) o << " ";
      o << px(X(s.x[i])) << "," << px(Y(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = mt + 16.0 + 16.0 * double(si);
    o << "<line x1=\"" << px(ml + pw - 150) << "\" y1=\"" << px(ly) << "\" x2=\""
      << px(ml + pw - 126) << "\" y2=\"" << px(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << px(ml + pw - 120) << "\" y=\"" << px(ly + 4)
      << "\" font-family=\"monospace\" font-size=\"11\">" << xml_escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << o.str();
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace diowave
