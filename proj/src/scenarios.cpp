// Named experiments. Each scenario validates its configuration up front,
// drives one module pipeline, writes deterministic CSV/SVG artifacts, and
// scores its checks into a Summary. Numbers flow through fmt_g17 so identical
// configs give identical bytes.

#include "diowave/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diowave/clusters.hpp"
#include "diowave/effective.hpp"
#include "diowave/format.hpp"
#include "diowave/lattice.hpp"
#include "diowave/resonance.hpp"
#include "diowave/waveguide.hpp"

namespace diowave {

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_num_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string tok = trim_copy(item);
    if (tok.empty()) throw std::invalid_argument("config: empty entry in " + key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config: non-numeric entry \"" + tok + "\" in " + key);
    }
    if (pos != tok.size())
      throw std::invalid_argument("config: trailing junk in " + key + " entry \"" + tok + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("config: " + key + " is empty");
  return out;
}

Mode parse_mode(const std::string& text, int dim, const std::string& key) {
  const std::vector<double> nums = parse_num_list(text, key);
  if (int(nums.size()) != dim)
    throw std::invalid_argument("config: " + key + " needs " + std::to_string(dim) +
                                " components");
  Mode m{};
  for (int i = 0; i < dim; ++i) {
    const double v = nums[std::size_t(i)];
    if (v != std::floor(v) || std::abs(v) > 1e6)
      throw std::invalid_argument("config: " + key + " components must be small integers");
    m[std::size_t(i)] = int(v);
  }
  return m;
}

void ensure_dir(const std::string& out) { std::filesystem::create_directories(out); }

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

std::vector<double> geometric_grid(double a, double b, int count) {
  if (!(a > 0.0) || !(b > a) || count < 2)
    throw std::invalid_argument("config: geometric grid needs 0 < min < max, count >= 2");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    t[std::size_t(k)] = a * std::pow(b / a, double(k) / double(count - 1));
  return t;
}

// Uniform complex box scaled to the requested total mass; zero mass gives the
// zero state with the generator still advanced deterministically.
std::vector<Complex> random_slice(const ModeBall& ball, std::uint64_t seed, double mass) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Complex> a(ball.size());
  double sum = 0.0;
  for (auto& v : a) {
    v = Complex(u(rng), u(rng));
    sum += std::norm(v);
  }
  const double scale = (mass > 0.0 && sum > 0.0) ? std::sqrt(mass / sum) : 0.0;
  for (auto& v : a) v *= scale;
  return a;
}

double total_mass(std::span<const Complex> a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return s;
}

int dim_of(const Config& cfg) { return cfg.integer_or("dim", 2); }

DispersionMatrix matrix_with_default(const Config& cfg, const std::string& kind) {
  if (cfg.has("matrix")) return matrix_from_config(cfg);
  const int d = dim_of(cfg);
  if (kind == "identity") return DispersionMatrix::identity(d);
  return DispersionMatrix::golden_fixture(d);
}

std::string matrix_kind(const Config& cfg, const std::string& fallback) {
  return cfg.str_or("matrix", fallback);
}

void apply_fixture(Summary& sum, const Config& cfg, const std::string& out,
                   const std::map<std::string, double>& values) {
  const std::string mode = cfg.str_or("fixture", "off");
  if (mode == "off") return;
  const std::string path = cfg.str_or("fixture_path", out + "/fixture.kv");
  if (mode == "record") {
    save_fixture(values, path);
    sum.check_true("fixture.recorded", true, path);
  } else if (mode == "compare") {
    compare_fixture(sum, values, path, cfg.num_or("fixture_rtol", 1e-9));
  } else {
    throw std::invalid_argument("config: fixture must be off, record, or compare");
  }
}

// Samples with t >= t_lo, paired.
void window_from(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                 std::vector<double>& tw, std::vector<double>& yw) {
  tw.clear();
  yw.clear();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= t_lo) {
      tw.push_back(t[i]);
      yw.push_back(y[i]);
    }
}

std::string default_mode1(int d) { return d == 1 ? "1" : (d == 2 ? "1,0" : "1,0,0"); }
std::string default_mode2(int d) { return d == 1 ? "-1" : (d == 2 ? "0,1" : "0,1,0"); }

// Gaussian envelope on two transverse modes, returned in Fourier representation.
WaveguideField gaussian_two_mode(std::shared_ptr<const WaveguideGrid> grid, const Config& cfg,
                                 double time) {
  const int d = grid->A.dim();
  const double eps = cfg.num_or("eps", 0.05);
  const double width = cfg.num_or("width", 1.0);
  if (!(width > 0.0)) throw std::invalid_argument("config: width must be positive");
  const Mode m1 = parse_mode(cfg.str_or("mode1", default_mode1(d)), d, "mode1");
  const Mode m2 = parse_mode(cfg.str_or("mode2", default_mode2(d)), d, "mode2");
  auto f = make_field(grid, Repr::Physical, time);
  for (const Mode& m : {m1, m2}) {
    const int idx = grid->ball->index(m);
    if (idx < 0)
      throw std::invalid_argument("config: transverse mode outside the ball radius");
    auto line = f.line(std::size_t(idx));
    for (int j = 0; j < grid->nx; ++j) {
      const double x = grid->x[std::size_t(j)];
      line[std::size_t(j)] += eps * std::exp(-width * x * x);
    }
  }
  to_fourier(f);
  return f;
}

WaveguideField field_from_slices(std::shared_ptr<const WaveguideGrid> grid,
                                 std::span<const Complex> g, double time) {
  auto f = make_field(grid, Repr::Fourier, time);
  const std::size_t nb = grid->ball->size();
  if (g.size() != nb * std::size_t(grid->nx))
    throw std::invalid_argument("slice data does not match the grid");
  for (std::size_t k = 0; k < std::size_t(grid->nx); ++k)
    for (std::size_t i = 0; i < nb; ++i) f.line(i)[k] = g[k * nb + i];
  return f;
}

double rel_mass_drift(const std::vector<std::pair<double, std::vector<Complex>>>& samples) {
  const double m0 = total_mass(samples.front().second);
  if (!(m0 > 0.0)) return 0.0;
  double worst = 0.0;
  for (const auto& [t, y] : samples) worst = std::max(worst, std::abs(total_mass(y) - m0) / m0);
  return worst;
}

}  // namespace

Summary scenario_admissibility_scan(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "admissibility-scan";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 16);
  if (radius < 2) throw std::invalid_argument("config: radius must be >= 2");

  std::vector<int> radii;
  if (cfg.has("radii")) {
    for (double v : parse_num_list(cfg.str("radii"), "radii")) radii.push_back(int(v));
  } else {
    for (int r = 4; r <= 2 * radius; r *= 2) radii.push_back(r);
    if (radii.empty()) radii.push_back(2 * radius);
  }

  std::map<std::string, double> fixture;
  std::vector<double> rs, cs;
  bool all_positive = true;
  std::string witness_note;
  {
    auto csv = open_out(out + "/admissibility.csv");
    csv << "# diowave-admissibility,v1\n";
    csv << "radius,constant,witness_a,witness_b\n";
    for (int r : radii) {
      const AdmissibilityReport rep = scan_admissibility(A, p.tau, r);
      csv << r << ',' << fmt_g17(rep.constant) << ',' << mode_to_string(rep.witness_a, d)
          << ',' << mode_to_string(rep.witness_b, d) << '\n';
      rs.push_back(double(r));
      cs.push_back(rep.constant);
      fixture["c_" + std::to_string(r)] = rep.constant;
      if (!rep.positive()) {
        all_positive = false;
        if (witness_note.empty())
          witness_note = "vanishes at R=" + std::to_string(r) + " with a=" +
                         mode_to_string(rep.witness_a, d) + " b=" +
                         mode_to_string(rep.witness_b, d);
      }
    }
  }

  const double cert = certified_resonance_tolerance(A, p.tau, radius);
  fixture["certified_tolerance"] = cert;

  const bool expect = cfg.flag_or("expect_admissible", matrix_kind(cfg, "golden") != "identity");
  sum.check_true("scan.admissible_matches_expectation", all_positive == expect,
                 all_positive ? "constant positive at every radius" : witness_note);
  if (expect)
    sum.check_true("scan.certified_tolerance_positive", cert > 0.0, fmt_g17(cert));
  else
    sum.check_true("scan.certified_tolerance_zero", cert == 0.0, fmt_g17(cert));

  PlotSpec spec;
  spec.title = "admissibility constant vs radius";
  spec.xlabel = "radius";
  spec.ylabel = "c_R";
  spec.logx = true;
  spec.logy = true;
  spec.series.push_back({"c_R", rs, cs});
  save_svg_plot(spec, out + "/admissibility.svg");

  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_cluster_report(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "cluster-report";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 24);
  const auto seed = std::uint64_t(cfg.integer_or("seed", 1));

  const ClusterPartition part = build_partition(A, radius, p.c_d);
  save_partition_csv(part, out + "/partition.csv");

  const CertificateReport dy = certify_dyadicity(part);
  const CertificateReport sep = certify_separation(part);
  const CertificateReport ne =
      certify_norm_equivalence(part, p.s, cfg.integer_or("cert_states", 25), seed);
  sum.check_true("cluster.dyadicity", dy.pass, dy.detail);
  sum.check_true("cluster.separation", sep.pass, sep.detail);
  sum.check_true("cluster.norm_equivalence", ne.pass, ne.detail);
  if (cfg.flag_or("certify_truncation", true)) {
    const ClusterPartition doubled = build_partition(A, 2 * radius, p.c_d);
    const CertificateReport tr = certify_truncation_stability(part, doubled);
    sum.check_true("cluster.truncation_stability", tr.pass, tr.detail);
  }

  std::vector<double> rank, weight;
  double max_weight = 0.0;
  std::size_t interior = 0;
  for (std::size_t i = 0; i < part.clusters().size(); ++i) {
    const Cluster& c = part.cluster(i);
    rank.push_back(double(i + 1));
    weight.push_back(c.weight);
    max_weight = std::max(max_weight, c.weight);
    if (c.interior) ++interior;
  }
  std::sort(weight.begin(), weight.end());

  PlotSpec spec;
  spec.title = "cluster weights (sorted)";
  spec.xlabel = "rank";
  spec.ylabel = "weight";
  spec.logy = true;
  spec.series.push_back({"weight", rank, weight});
  save_svg_plot(spec, out + "/weights.svg");

  std::map<std::string, double> fixture;
  fixture["cluster_count"] = double(part.clusters().size());
  fixture["interior_count"] = double(interior);
  fixture["origin_bound"] = part.origin_bound();
  fixture["max_weight"] = max_weight;
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_resonance_census(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "resonance-census";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 20);
  const auto cap = std::size_t(cfg.integer_or("cap", 1000000));
  const auto seed = std::uint64_t(cfg.integer_or("seed", 1));

  const double tol = cfg.num_or("tol_res", certified_resonance_tolerance(A, p.tau, radius));
  const ResonantSet set = enumerate_resonant_set(A, radius, tol, cap);
  save_resonant_set_csv(A, set, out + "/resonant_set.csv");

  const bool expect =
      cfg.flag_or("expect_trivial_only", matrix_kind(cfg, "golden") != "identity");
  const std::string counts = "members=" + std::to_string(set.member_count) +
                             " pairing=" + std::to_string(set.pairing_count) +
                             " non_pairing=" + std::to_string(set.non_pairing_count);
  sum.check_true("census.trivial_only_matches_expectation", set.trivial_only == expect, counts);
  sum.check_true("census.not_truncated", !set.truncated,
                 "cap=" + std::to_string(cap));

  if (set.trivial_only) {
    const ModeBall ball(d, radius);
    const std::vector<Complex> a = random_slice(ball, seed, 1.0);
    const SumIdentityCheck chk = resonant_sum_identity_check(set, ball, a);
    sum.check_le("census.sum_identity_rel_error", chk.rel_error, 1e-12);
  } else {
    sum.check_true("census.sum_identity_inapplicable", true,
                   "closed form holds for pairing-only sets");
  }

  const ClusterPartition part = build_partition(A, radius, p.c_d);
  const double alpha0c = cfg.num_or("alpha0_const", default_alpha0_constant(part));
  const QuasiResonantIndex idx = build_quasi_resonant_index(part, p.theta, alpha0c);
  if (cfg.flag_or("save_index", false))
    save_quasi_index_csv(idx, out + "/quasi_index.csv");

  std::map<std::string, double> fixture;
  fixture["member_count"] = double(set.member_count);
  fixture["pairing_count"] = double(set.pairing_count);
  fixture["non_pairing_count"] = double(set.non_pairing_count);
  fixture["lambda_triple_count"] = double(idx.triple_count);
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_divisor_ledger(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "divisor-ledger";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 32);
  const auto samples = std::size_t(cfg.integer_or("samples", 2000));
  const auto seed = std::uint64_t(cfg.integer_or("seed", 1));
  const auto row_cap = std::size_t(cfg.integer_or("row_cap", 1000));

  const ClusterPartition part = build_partition(A, radius, p.c_d);
  const double alpha0c = cfg.num_or("alpha0_const", default_alpha0_constant(part));
  const QuasiResonantIndex idx = build_quasi_resonant_index(part, p.theta, alpha0c);
  const DivisorLedger led = divisor_ledger(part, idx, p.s, p.tau, samples, seed, row_cap);
  save_divisor_ledger_csv(led, out + "/divisor_ledger.csv");
  if (cfg.flag_or("save_index", false))
    save_quasi_index_csv(idx, out + "/quasi_index.csv");

  sum.check_ge("ledger.accepted", double(led.accepted), 1.0,
               "draws=" + std::to_string(led.draws));
  sum.check_true("ledger.max_ratio_finite",
                 std::isfinite(led.max_ratio) && led.max_ratio > 0.0,
                 "argmax omega=" + fmt_g17(led.argmax.omega));
  if (cfg.has("ratio_bound"))
    sum.check_le("ledger.max_ratio", led.max_ratio, cfg.num("ratio_bound"));

  std::vector<double> rank, ratio;
  for (const DivisorSample& row : led.rows) ratio.push_back(row.ratio);
  std::sort(ratio.begin(), ratio.end());
  for (std::size_t i = 0; i < ratio.size(); ++i) rank.push_back(double(i + 1));

  PlotSpec spec;
  spec.title = "small-divisor ratio sample (sorted)";
  spec.xlabel = "rank";
  spec.ylabel = "ratio";
  spec.logy = true;
  spec.series.push_back({"ratio", rank, ratio});
  save_svg_plot(spec, out + "/ratios.svg");

  std::map<std::string, double> fixture;
  fixture["max_ratio"] = led.max_ratio;
  fixture["core_max_ratio"] = led.core_max_ratio;
  fixture["q50"] = led.q50;
  fixture["q90"] = led.q90;
  fixture["q99"] = led.q99;
  fixture["accepted"] = double(led.accepted);
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_effective_run(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "effective-run";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 16);
  const auto seed = std::uint64_t(cfg.integer_or("seed", 1));
  const double slice_mass = cfg.num_or("slice_mass", 1.0);
  const int slices = cfg.integer_or("slices", 1);
  if (slices < 1) throw std::invalid_argument("config: slices must be >= 1");
  const double t0 = cfg.num_or("t0", 1.0);
  const double t1 = cfg.num_or("t1", 10.0);
  std::vector<double> hs = parse_num_list(cfg.str_or("h_list", "1e-2,5e-3,2.5e-3"), "h_list");
  std::sort(hs.begin(), hs.end(), std::greater<double>());

  const ClusterPartition part = build_partition(A, radius, p.c_d);
  const double alpha0c = cfg.num_or("alpha0_const", 8.0);
  const QuasiResonantIndex idx = build_quasi_resonant_index(part, p.theta, alpha0c);

  std::vector<double> xi(static_cast<std::size_t>(slices));
  for (int k = 0; k < slices; ++k) xi[std::size_t(k)] = 0.25 * k;
  EffectiveWaveguideState g0 = make_effective_state(idx.state_ball, xi, t0);
  for (int k = 0; k < slices; ++k) {
    const std::vector<Complex> a = random_slice(*idx.state_ball, seed + std::uint64_t(k),
                                                slice_mass);
    std::copy(a.begin(), a.end(), g0.slice(std::size_t(k)).begin());
  }

  IntegrateOptions opts;
  opts.sample_stride = cfg.integer_or("sample_stride", 10);

  std::vector<double> sa_drift, z_drift, hs_drift;
  std::size_t tracked = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const EffectiveTrajectory traj = integrate_effective(g0, idx, t0, t1, hs[i], opts);
    const ConservationReport rep = conservation_report(part, traj, p.s, alpha0c);
    tracked = rep.tracked_clusters.size();
    sa_drift.push_back(rep.max_superaction_drift);
    z_drift.push_back(rep.max_z_drift);
    hs_drift.push_back(rep.max_hs_drift);
    if (i + 1 == hs.size()) {
      save_conservation_csv(rep, out + "/conservation.csv");
      save_norm_trace_csv(rep, out + "/norm_trace.csv");
    }
  }

  {
    auto csv = open_out(out + "/drift_vs_h.csv");
    csv << "# diowave-effective-drift,v1\n";
    csv << "h,superaction_drift,z_drift,hs_drift\n";
    for (std::size_t i = 0; i < hs.size(); ++i)
      csv << fmt_g17(hs[i]) << ',' << fmt_g17(sa_drift[i]) << ',' << fmt_g17(z_drift[i])
          << ',' << fmt_g17(hs_drift[i]) << '\n';
  }

  sum.check_ge("effective.tracked_clusters", double(tracked), 1.0,
               "weight cutoff " + fmt_g17(alpha0c));

  const double worst =
      std::max({*std::max_element(sa_drift.begin(), sa_drift.end()),
                *std::max_element(z_drift.begin(), z_drift.end()),
                *std::max_element(hs_drift.begin(), hs_drift.end())});
  const double finest_bound = cfg.num_or("drift_bound", 1e-8);
  if (worst < 1e-14 || hs.size() < 2) {
    sum.check_true("effective.conserved_at_roundoff", true,
                   "max drift " + fmt_g17(worst) + "; order fit skipped");
  } else {
    sum.check_in("effective.superaction_order", fit_loglog(hs, sa_drift).slope, 3.5, 4.5);
    sum.check_in("effective.z_order", fit_loglog(hs, z_drift).slope, 3.5, 4.5);
    sum.check_in("effective.hs_order", fit_loglog(hs, hs_drift).slope, 3.5, 4.5);
  }
  sum.check_le("effective.superaction_drift_finest", sa_drift.back(), finest_bound);
  sum.check_le("effective.z_drift_finest", z_drift.back(), finest_bound);
  sum.check_le("effective.hs_drift_finest", hs_drift.back(), finest_bound);

  PlotSpec spec;
  spec.title = "conservation drift vs step size";
  spec.xlabel = "h";
  spec.ylabel = "relative drift";
  spec.logx = true;
  spec.logy = true;
  spec.series.push_back({"super-action", hs, sa_drift});
  spec.series.push_back({"Z", hs, z_drift});
  spec.series.push_back({"Hs", hs, hs_drift});
  save_svg_plot(spec, out + "/drift_vs_h.svg");

  std::map<std::string, double> fixture;
  fixture["superaction_drift_finest"] = sa_drift.back();
  fixture["z_drift_finest"] = z_drift.back();
  fixture["hs_drift_finest"] = hs_drift.back();
  fixture["tracked_clusters"] = double(tracked);
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_full_vs_effective(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "full-vs-effective";
  const int d = dim_of(cfg);
  const AnalysisParams p = analysis_params(cfg, d);
  const int radius = cfg.integer_or("radius", 16);
  const auto seed = std::uint64_t(cfg.integer_or("seed", 1));
  const double slice_mass = cfg.num_or("slice_mass", 1.0);
  const double t0 = cfg.num_or("t0", 1.0);
  const double t1 = cfg.num_or("t1", 3.0);
  const double h = cfg.num_or("h", 5e-3);
  const int stride = cfg.integer_or("sample_stride", 20);
  const double cutoff = cfg.num_or("track_cutoff", 4.0);

  const DispersionMatrix resonant = DispersionMatrix::identity(d);
  const DispersionMatrix admissible = matrix_with_default(cfg, "golden");

  auto ball = std::make_shared<const ModeBall>(d, radius);
  const std::vector<Complex> a0 = random_slice(*ball, seed, slice_mass);

  struct Leg {
    std::string label;
    double superaction_drift = 0.0, z_drift = 0.0, hs_drift = 0.0, mass_drift = 0.0;
    std::vector<double> times, trace;
  };
  std::vector<Leg> legs;
  for (const auto& [label, A] :
       {std::pair<std::string, const DispersionMatrix&>{"identity", resonant},
        {"admissible", admissible}}) {
    const ClusterPartition part = build_partition(A, radius, p.c_d);
    FullToroidalRhs rhs(A, ball);
    const auto samples = integrate_rk4(
        [&rhs](double t, std::span<const Complex> y, std::span<Complex> dy) {
          rhs(y, t, dy);
        },
        a0, t0, t1, h, stride);
    const EffectiveTrajectory traj = wrap_toroidal_trajectory(ball, samples);
    const ConservationReport rep = conservation_report(part, traj, p.s, cutoff);
    save_conservation_csv(rep, out + "/conservation_" + label + ".csv");

    Leg leg;
    leg.label = label;
    leg.superaction_drift = rep.max_superaction_drift;
    leg.z_drift = rep.max_z_drift;
    leg.hs_drift = rep.max_hs_drift;
    leg.mass_drift = rel_mass_drift(samples);
    // Trace of the worst-drifting tracked cluster for the comparison plot.
    if (!rep.tracked_clusters.empty()) {
      const std::size_t nt = rep.tracked_clusters.size();
      std::size_t worst_j = 0;
      double worst_dev = -1.0;
      for (std::size_t j = 0; j < nt; ++j) {
        const double base = rep.super_actions.front()[j];
        double dev = 0.0;
        for (const auto& row : rep.super_actions) dev = std::max(dev, std::abs(row[j] - base));
        if (dev > worst_dev) {
          worst_dev = dev;
          worst_j = j;
        }
      }
      leg.times = rep.times;
      for (const auto& row : rep.super_actions) leg.trace.push_back(row[worst_j]);
    }
    legs.push_back(std::move(leg));
  }

  {
    auto csv = open_out(out + "/drift_compare.csv");
    csv << "# diowave-control-drift,v1\n";
    csv << "matrix,superaction_drift,z_drift,hs_drift,mass_drift\n";
    for (const Leg& leg : legs)
      csv << leg.label << ',' << fmt_g17(leg.superaction_drift) << ',' << fmt_g17(leg.z_drift)
          << ',' << fmt_g17(leg.hs_drift) << ',' << fmt_g17(leg.mass_drift) << '\n';
  }

  // Only the identity side gates: at fixed radius the admissible matrix keeps
  // near-resonances below the nonlinear frequency shift, so the full flow
  // drifts on desk windows for both matrices; the contrast is asymptotic and
  // is reported in the CSV and fixture rather than scored.
  const Leg& id = legs[0];
  const Leg& adm = legs[1];
  sum.check_ge("control.identity_superaction_drift", id.superaction_drift, 1e-3,
               "admissible run drifted " + fmt_g17(adm.superaction_drift));
  sum.check_ge("control.identity_drift_over_integrator",
               id.superaction_drift / std::max(id.mass_drift, 1e-300), 1e4,
               "mass proxy " + fmt_g17(id.mass_drift));

  PlotSpec spec;
  spec.title = "worst tracked super-action, full flow";
  spec.xlabel = "t";
  spec.ylabel = "super-action";
  for (const Leg& leg : legs)
    if (!leg.times.empty()) spec.series.push_back({leg.label, leg.times, leg.trace});
  save_svg_plot(spec, out + "/superaction.svg");

  std::map<std::string, double> fixture;
  fixture["identity_superaction_drift"] = id.superaction_drift;
  fixture["admissible_superaction_drift"] = adm.superaction_drift;
  fixture["identity_mass_drift"] = id.mass_drift;
  fixture["admissible_mass_drift"] = adm.mass_drift;
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_nls_run(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "nls-run";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const double L = cfg.num_or("L", 200.0);
  const int nx = cfg.integer_or("nx", 4096);
  const int radius = cfg.integer_or("radius", 4);
  const double t1 = cfg.num_or("t1", 40.0);
  const double h = cfg.num_or("h", 0.02);
  const double fit_t0 = cfg.num_or("fit_t0", 2.0);

  auto grid = make_waveguide_grid(A, L, nx, radius);
  const ClusterPartition part = build_partition(A, radius, p.c_d);
  const WaveguideField U0 = gaussian_two_mode(grid, cfg, cfg.num_or("t_init", 0.0));

  EvolveOptions opts;
  opts.sample_stride = cfg.integer_or("sample_stride", 25);
  opts.dealias = cfg.flag_or("dealias", false);
  opts.keep_fields = false;

  std::vector<NormReport> reps;
  std::vector<double> masses;
  const auto on_sample = [&](const WaveguideField& f) {
    reps.push_back(field_norms(f, part, p.s, p.sigma, p.delta));
    masses.push_back(field_mass(f));
  };
  evolve_nls(U0, t1, h, opts, on_sample);
  save_field_norms_csv(reps, out + "/norms.csv");

  std::vector<double> ts, linf, hsn;
  for (const NormReport& r : reps) {
    ts.push_back(r.t);
    linf.push_back(r.hs_linf);
    hsn.push_back(r.hs);
  }

  std::vector<double> tw, yw;
  window_from(ts, linf, fit_t0, tw, yw);
  double slope = 0.0;
  if (tw.size() >= 2 && *std::min_element(yw.begin(), yw.end()) > 0.0) {
    slope = fit_loglog(tw, yw).slope;
    sum.check_in("nls.decay_slope", slope, -0.6, -0.4);
  } else {
    sum.check_true("nls.decay_fit_window", false, "no usable samples past fit_t0");
  }

  std::vector<double> hw;
  window_from(ts, hsn, fit_t0, tw, hw);
  const double hs0 = hsn.front();
  double dev = 0.0;
  for (double v : hw) dev = std::max(dev, std::abs(v / hs0 - 1.0));
  sum.check_le("nls.hs_ratio_deviation", dev, 0.1);

  double mass_drift = 0.0;
  for (double m : masses) mass_drift = std::max(mass_drift, std::abs(m - masses.front()));
  mass_drift /= std::max(masses.front(), 1e-300);
  sum.check_le("nls.mass_drift", mass_drift, cfg.num_or("mass_drift_bound", 1e-4),
               "re-truncation sheds out-of-ball cubic content, order t1*h*eps^4");

  {
    PlotSpec spec;
    spec.title = "sup-in-x transverse norm decay";
    spec.xlabel = "t";
    spec.ylabel = "norm";
    spec.logx = true;
    spec.logy = true;
    std::vector<double> tref, yref;
    window_from(ts, linf, std::max(fit_t0, 1e-9), tref, yref);
    spec.series.push_back({"measured", ts, linf});
    if (!tref.empty() && yref.front() > 0.0) {
      const double c = yref.front() * std::sqrt(tref.front());
      std::vector<double> ref;
      for (double t : tref) ref.push_back(c / std::sqrt(t));
      spec.series.push_back({"t^-1/2 reference", tref, ref});
    }
    save_svg_plot(spec, out + "/decay.svg");
  }
  {
    PlotSpec spec;
    spec.title = "Sobolev trace";
    spec.xlabel = "t";
    spec.ylabel = "Hs";
    spec.series.push_back({"Hs", ts, hsn});
    save_svg_plot(spec, out + "/sobolev.svg");
  }

  std::map<std::string, double> fixture;
  fixture["decay_slope"] = slope;
  fixture["final_hs_linf"] = linf.back();
  fixture["final_hs"] = hsn.back();
  fixture["mass_drift"] = mass_drift;
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_scattering_compare(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "scattering-compare";
  const int d = dim_of(cfg);
  const DispersionMatrix A = matrix_with_default(cfg, "golden");
  const AnalysisParams p = analysis_params(cfg, d);
  const double L = cfg.num_or("L", 200.0);
  const int nx = cfg.integer_or("nx", 4096);
  const int radius = cfg.integer_or("radius", 4);
  const double t0 = cfg.num_or("t0", 1.0);
  const double t1 = cfg.num_or("t1", 40.0);
  const double h = cfg.num_or("h", 0.02);
  const double fit_t0 = cfg.num_or("fit_t0", 5.0);
  if (t0 < 1.0) throw std::invalid_argument("config: t0 must be >= 1 for the profile flow");

  auto grid = make_waveguide_grid(A, L, nx, radius);
  const ClusterPartition part = build_partition(A, radius, p.c_d);
  const double alpha0c = cfg.num_or("alpha0_const", default_alpha0_constant(part));
  const QuasiResonantIndex idx = build_quasi_resonant_index(part, p.theta, alpha0c);

  const WaveguideField U0 = gaussian_two_mode(grid, cfg, t0);

  EvolveOptions opts;
  opts.sample_stride = cfg.integer_or("sample_stride", 50);
  opts.dealias = cfg.flag_or("dealias", false);
  opts.keep_fields = true;
  const WaveguideTrajectory traj = evolve_nls(U0, t1, h, opts);

  // Effective profile system from G(t0) = F(t0), same step grid so samples pair.
  const std::size_t nb = grid->ball->size();
  const WaveguideField F0 = extract_profile(traj.samples.front(), traj.times.front());
  std::vector<Complex> g0(nb * std::size_t(nx));
  for (std::size_t k = 0; k < std::size_t(nx); ++k)
    for (std::size_t i = 0; i < nb; ++i) g0[k * nb + i] = F0.line(i)[k];
  const auto geff = integrate_rk4(
      [&idx, nx](double t, std::span<const Complex> y, std::span<Complex> dy) {
        effective_rhs(idx, std::size_t(nx), y, t, dy);
      },
      g0, t0, t1, h, opts.sample_stride);

  if (geff.size() != traj.times.size())
    throw std::logic_error("sampling schedules diverged between the two flows");

  const double ref = field_norms(F0, part, p.s, p.sigma, p.delta).hs;
  std::vector<double> ts, diffs;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double tF = traj.times[i];
    if (std::abs(tF - geff[i].first) > 1e-9 * std::max(1.0, std::abs(tF)))
      throw std::logic_error("sampling schedules diverged between the two flows");
    const WaveguideField F = extract_profile(traj.samples[i], tF);
    WaveguideField D = field_from_slices(grid, geff[i].second, tF);
    for (std::size_t m = 0; m < D.v.size(); ++m) D.v[m] = F.v[m] - D.v[m];
    ts.push_back(tF);
    diffs.push_back(field_norms(D, part, p.s, p.sigma, p.delta).hs);
  }

  {
    auto csv = open_out(out + "/scatter.csv");
    csv << "# diowave-scattering,v1\n";
    csv << "t,diff_hs,diff_over_ref\n";
    for (std::size_t i = 0; i < ts.size(); ++i)
      csv << fmt_g17(ts[i]) << ',' << fmt_g17(diffs[i]) << ',' << fmt_g17(diffs[i] / ref)
          << '\n';
  }

  std::vector<double> tw, yw;
  window_from(ts, diffs, fit_t0, tw, yw);
  if (tw.size() < 2) {
    sum.check_true("scatter.window", false, "no usable samples past fit_t0");
  } else {
    const double worst = *std::max_element(yw.begin(), yw.end());
    sum.check_le("scatter.max_diff_over_ref", worst / ref, 0.2,
                 "ref Hs " + fmt_g17(ref));
    // Trend dead-band: secular divergence shows +0.5 or more per decade,
    // while at fixed eps the window carries an irreducible eps^5 t creep of
    // a few percent on top of the eps^3/Omega plateau. Slopes inside the
    // band classify as non-increasing.
    if (*std::min_element(yw.begin(), yw.end()) > 0.0)
      sum.check_le("scatter.trend_slope", fit_loglog(tw, yw).slope, 0.05,
                   "log-log slope over the fit window");
    else
      sum.check_true("scatter.trend_at_roundoff", true, "difference at round-off");
  }

  PlotSpec spec;
  spec.title = "profile vs effective system";
  spec.xlabel = "t";
  spec.ylabel = "relative difference";
  std::vector<double> rel;
  for (double v : diffs) rel.push_back(v / ref);
  spec.series.push_back({"|F-G| / |F(t0)|", ts, rel});
  save_svg_plot(spec, out + "/scatter.svg");

  std::map<std::string, double> fixture;
  fixture["final_diff_over_ref"] = diffs.back() / ref;
  fixture["max_diff_over_ref"] =
      *std::max_element(diffs.begin(), diffs.end()) / ref;
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

Summary scenario_dispersive_check(const Config& cfg, const std::string& out) {
  ensure_dir(out);
  Summary sum;
  sum.scenario = "dispersive-check";
  analysis_params(cfg, dim_of(cfg));
  const double L = cfg.num_or("L", 2000.0);
  const int nx = cfg.integer_or("nx", 16384);
  const double t_min = cfg.num_or("t_min", 1.0);
  const double t_max = cfg.num_or("t_max", 100.0);
  const int t_count = cfg.integer_or("t_count", 25);
  const double a = cfg.num_or("width", 1.0);
  const std::string profile = cfg.str_or("profile", "gaussian");
  if (!(a > 0.0)) throw std::invalid_argument("config: width must be positive");
  if (nx < 8 || !(L > 0.0)) throw std::invalid_argument("config: need nx >= 8 and L > 0");

  const double dx = 2.0 * L / nx;
  std::vector<Complex> f(static_cast<std::size_t>(nx));
  std::vector<double> xs(static_cast<std::size_t>(nx));
  for (int j = 0; j < nx; ++j) {
    const double x = -L + j * dx;
    xs[std::size_t(j)] = x;
    if (profile == "gaussian") {
      f[std::size_t(j)] = std::exp(-a * x * x);
    } else if (profile == "modulated") {
      const double depth = cfg.num_or("mod_depth", 0.3);
      const double freq = cfg.num_or("mod_freq", 2.0);
      f[std::size_t(j)] = std::exp(-a * x * x) * (1.0 + depth * std::cos(freq * x));
    } else {
      throw std::invalid_argument("config: profile must be gaussian or modulated");
    }
  }

  const std::vector<double> times = geometric_grid(t_min, t_max, t_count);
  std::vector<double> sups, norms;
  {
    auto csv = open_out(out + "/dispersive.csv");
    csv << "# diowave-dispersive,v1\n";
    csv << "t,sup_error,normalized\n";
    for (double t : times) {
      const DispersiveReport rep = dispersive_check(f, L, t);
      sups.push_back(rep.sup_error);
      norms.push_back(rep.normalized);
      csv << fmt_g17(t) << ',' << fmt_g17(rep.sup_error) << ',' << fmt_g17(rep.normalized)
          << '\n';
    }
  }

  const double lo = *std::min_element(norms.begin(), norms.end());
  const double hi = *std::max_element(norms.begin(), norms.end());
  sum.check_le("dispersive.normalized_ratio", hi / std::max(lo, 1e-300), 10.0,
               "normalized errors over the sweep");

  if (profile == "gaussian") {
    const double t_cf = std::clamp(cfg.num_or("crosscheck_t", 5.0), t_min, t_max);
    const DispersiveReport rep = dispersive_check(f, L, t_cf);
    // Closed forms for e^{-a x^2}: exact free evolution and the principal
    // stationary-phase term; both evaluated on the sample grid.
    double sup_cf = 0.0;
    const Complex denom = 1.0 + Complex(0.0, 4.0 * a * t_cf);
    for (int j = 0; j < nx; ++j) {
      const double x = xs[std::size_t(j)];
      const Complex exact = std::exp(-a * x * x / denom) / std::sqrt(denom);
      const Complex approx = std::polar(1.0, x * x / (4.0 * t_cf) - M_PI / 4.0) *
                             std::exp(-x * x / (16.0 * a * t_cf * t_cf)) /
                             (2.0 * std::sqrt(a * t_cf));
      sup_cf = std::max(sup_cf, std::abs(exact - approx));
    }
    sum.check_le("dispersive.gaussian_crosscheck", std::abs(rep.sup_error - sup_cf), 1e-8,
                 "closed form at t=" + fmt_g17(t_cf));
  }

  PlotSpec spec;
  spec.title = "stationary-phase error sweep";
  spec.xlabel = "t";
  spec.ylabel = "error";
  spec.logx = true;
  spec.logy = true;
  spec.series.push_back({"sup error", times, sups});
  spec.series.push_back({"normalized", times, norms});
  save_svg_plot(spec, out + "/dispersive.svg");

  std::map<std::string, double> fixture;
  fixture["normalized_min"] = lo;
  fixture["normalized_max"] = hi;
  fixture["normalized_ratio"] = hi / std::max(lo, 1e-300);
  apply_fixture(sum, cfg, out, fixture);
  return sum;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "admissibility-scan", "cluster-report",     "resonance-census",
      "divisor-ledger",     "effective-run",      "full-vs-effective",
      "nls-run",            "scattering-compare", "dispersive-check"};
  return names;
}

Summary run_scenario_report(const std::string& name, const Config& cfg,
                            const std::string& out) {
  using Fn = Summary (*)(const Config&, const std::string&);
  static const std::map<std::string, Fn> table = {
      {"admissibility-scan", &scenario_admissibility_scan},
      {"cluster-report", &scenario_cluster_report},
      {"resonance-census", &scenario_resonance_census},
      {"divisor-ledger", &scenario_divisor_ledger},
      {"effective-run", &scenario_effective_run},
      {"full-vs-effective", &scenario_full_vs_effective},
      {"nls-run", &scenario_nls_run},
      {"scattering-compare", &scenario_scattering_compare},
      {"dispersive-check", &scenario_dispersive_check},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown scenario \"" + name + "\"");
  ensure_dir(out);
  const Summary s = it->second(cfg, out);
  save_summary_json(s, out + "/summary.json");
  return s;
}

int run_scenario(const std::string& name, const Config& cfg, const std::string& out) {
  return run_scenario_report(name, cfg, out).all_pass() ? 0 : 1;
}

}  // namespace diowave
