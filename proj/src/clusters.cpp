#include "diowave/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "diowave/format.hpp"
#include "diowave/rng.hpp"

namespace diowave {

namespace {

struct Dsu {
  std::vector<std::int32_t> parent, rank_;
  explicit Dsu(std::size_t n) : parent(n), rank_(n, 0) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = std::int32_t(i);
  }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }
};

// Least w with w >= (2R + w)^{c_d}: an edge leaving ball(R) is no longer than
// w, so neighbors of ball(R) stay inside ball(R + w).
double interior_reach_bound(int radius, double c_d) {
  double base = 2.0 * radius;
  double w = std::pow(base, c_d);
  for (int i = 0; i < 8; ++i) w = std::pow(base + w, c_d);
  w = std::ceil(w) + 1;
  while (w < std::pow(base + w, c_d)) {
    w *= 2;
    if (w > 4.0 * base) return std::numeric_limits<double>::infinity();
  }
  return w;
}

std::string cluster_brief(const Cluster& c, int dim) {
  std::ostringstream os;
  os << "size=" << c.members.size() << " weight=" << fmt_g17(c.weight)
     << " min=" << fmt_g17(c.min_abs) << " max=" << fmt_g17(c.max_abs)
     << " first=" << mode_to_string(c.members.front(), dim);
  return os.str();
}

void fill_derived(Cluster& c, int radius, double reach) {
  c.origin = is_zero(c.members.front());
  c.min_abs = norm(c.members.front());
  c.max_abs = norm(c.members.back());
  c.weight = c.origin ? 1.0 : c.min_abs;
  bool in_ball = norm2(c.members.back()) <= std::int64_t(radius) * radius;
  c.interior = in_ball && reach <= double(radius);
}

void check_dyadic(const std::vector<Cluster>& clusters, int dim) {
  for (std::size_t a = 0; a < clusters.size(); ++a) {
    const Cluster& c = clusters[a];
    if (!c.interior || c.origin) continue;
    std::int64_t min2 = norm2(c.members.front());
    std::int64_t max2 = norm2(c.members.back());
    if (max2 > 4 * min2)
      throw std::runtime_error("cluster partition: interior cluster " + std::to_string(a) +
                               " violates dyadicity: " + cluster_brief(c, dim));
  }
}

bool members_sorted(const std::vector<Mode>& ms) {
  for (std::size_t i = 1; i < ms.size(); ++i) {
    std::int64_t p = norm2(ms[i - 1]), q = norm2(ms[i]);
    if (p > q || (p == q && !(ms[i - 1] < ms[i]))) return false;
  }
  return true;
}

}  // namespace

ClusterPartition::ClusterPartition(const DispersionMatrix& A, int radius, double c_d,
                                   ModeBall padded, std::vector<Cluster> clusters,
                                   std::vector<std::int32_t> cluster_of, double reach)
    : a_(A),
      radius_(radius),
      c_d_(c_d),
      padded_(std::move(padded)),
      clusters_(std::move(clusters)),
      cluster_of_(std::move(cluster_of)),
      reach_(reach) {}

double ClusterPartition::weight_of_mode(const Mode& m) const {
  int c = cluster_of(m);
  if (c < 0) throw std::invalid_argument("weight_of_mode: mode outside the padded ball");
  return clusters_[std::size_t(c)].weight;
}

int ClusterPartition::high_frequency_cutoff(double cutoff) const {
  for (std::size_t a = 1; a < clusters_.size(); ++a)
    if (clusters_[a].weight >= cutoff) return int(a);
  return -1;
}

bool ClusterPartition::high_frequency(const Mode& m, double cutoff) const {
  int c = cluster_of(m);
  if (c <= 0) return false;
  return clusters_[std::size_t(c)].weight >= cutoff;
}

ClusterPartition build_partition(const DispersionMatrix& A, int radius, double c_d) {
  if (!(c_d > 0) || c_d > 2)
    throw std::invalid_argument("build_partition: c_d must lie in (0, 2]");
  if (radius < 1) throw std::invalid_argument("build_partition: radius must be >= 1");

  ModeBall padded(A.dim(), 2 * radius);
  const std::size_t m_count = padded.size();
  std::vector<double> lam(m_count), nrm(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    lam[i] = A.eigenvalue_sq(padded.mode(i));
    nrm[i] = norm(padded.mode(i));
  }

  // Any edge inside ball(2R) is no longer than (4R)^{c_d}.
  int wb = int(std::floor(std::pow(4.0 * radius, c_d)));
  wb = std::min(wb, 4 * radius);
  std::vector<Mode> offs;
  std::vector<double> offlen;
  {
    ModeBall window(A.dim(), wb);
    for (const Mode& d : window.modes())
      if (lex_positive(d)) {
        offs.push_back(d);
        offlen.push_back(norm(d));
      }
  }

  const bool half = c_d == 0.5;
  Dsu dsu(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    const Mode& m = padded.mode(i);
    for (std::size_t k = 0; k < offs.size(); ++k) {
      int j = padded.index(add(m, offs[k]));
      if (j < 0) continue;
      double lhs = offlen[k] + std::fabs(lam[i] - lam[std::size_t(j)]);
      double s = nrm[i] + nrm[std::size_t(j)];
      double thr = half ? std::sqrt(s) : std::pow(s, c_d);
      if (lhs <= thr) dsu.unite(std::int32_t(i), j);
    }
  }

  std::vector<std::int32_t> root_cluster(m_count, -1);
  std::vector<Cluster> clusters;
  std::vector<std::int32_t> cl_of(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    std::int32_t r = dsu.find(std::int32_t(i));
    if (root_cluster[std::size_t(r)] < 0) {
      root_cluster[std::size_t(r)] = std::int32_t(clusters.size());
      clusters.emplace_back();
    }
    std::int32_t cid = root_cluster[std::size_t(r)];
    clusters[std::size_t(cid)].members.push_back(padded.mode(i));
    cl_of[i] = cid;
  }

  double reach = interior_reach_bound(radius, c_d);
  for (Cluster& c : clusters) fill_derived(c, radius, reach);

  std::sort(clusters.begin(), clusters.end(), [](const Cluster& x, const Cluster& y) {
    if (x.origin != y.origin) return x.origin;
    if (x.weight != y.weight) return x.weight < y.weight;
    return x.members.front() < y.members.front();
  });
  for (std::size_t a = 0; a < clusters.size(); ++a)
    for (const Mode& m : clusters[a].members)
      cl_of[std::size_t(padded.index(m))] = std::int32_t(a);

  check_dyadic(clusters, A.dim());
  return ClusterPartition(A, radius, c_d, std::move(padded), std::move(clusters),
                          std::move(cl_of), reach);
}

ClusterPartition ClusterPartition::from_parts(const DispersionMatrix& A, int radius, double c_d,
                                              std::vector<Cluster> clusters,
                                              std::vector<std::int32_t> cluster_of) {
  if (!(c_d > 0) || c_d > 2) throw std::runtime_error("partition parts: c_d out of range");
  if (radius < 1) throw std::runtime_error("partition parts: bad radius");
  ModeBall padded(A.dim(), 2 * radius);
  if (cluster_of.size() != padded.size())
    throw std::runtime_error("partition parts: mode table does not cover the padded ball");
  if (clusters.empty()) throw std::runtime_error("partition parts: no clusters");

  std::size_t total = 0;
  double reach = interior_reach_bound(radius, c_d);
  for (std::size_t a = 0; a < clusters.size(); ++a) {
    Cluster& c = clusters[a];
    if (c.members.empty()) throw std::runtime_error("partition parts: empty cluster");
    if (!members_sorted(c.members))
      throw std::runtime_error("partition parts: cluster members out of order");
    total += c.members.size();
    for (const Mode& m : c.members) {
      int i = padded.index(m);
      if (i < 0 || cluster_of[std::size_t(i)] != std::int32_t(a))
        throw std::runtime_error("partition parts: member/table mismatch at mode " +
                                 mode_to_string(m, A.dim()));
    }
    Cluster derived = c;
    fill_derived(derived, radius, reach);
    if (derived.weight != c.weight || derived.interior != c.interior ||
        derived.origin != c.origin)
      throw std::runtime_error("partition parts: stored derived fields disagree for cluster " +
                               std::to_string(a) + ": " + cluster_brief(derived, A.dim()));
    c = derived;
  }
  if (total != padded.size())
    throw std::runtime_error("partition parts: clusters do not partition the padded ball");
  if (!clusters.front().origin)
    throw std::runtime_error("partition parts: cluster 0 must contain the zero mode");
  for (std::size_t a = 2; a < clusters.size(); ++a) {
    const Cluster& x = clusters[a - 1];
    const Cluster& y = clusters[a];
    if (x.weight > y.weight ||
        (x.weight == y.weight && !(x.members.front() < y.members.front())))
      throw std::runtime_error("partition parts: clusters out of order");
  }
  check_dyadic(clusters, A.dim());
  return ClusterPartition(A, radius, c_d, std::move(padded), std::move(clusters),
                          std::move(cluster_of), reach);
}

CertificateReport certify_dyadicity(const ClusterPartition& p) {
  CertificateReport rep;
  rep.pass = true;
  for (std::size_t a = 0; a < p.clusters().size(); ++a) {
    const Cluster& c = p.clusters()[a];
    if (!c.interior || c.origin) continue;
    ++rep.checked;
    double ratio = c.max_abs / c.min_abs;
    rep.measured = std::max(rep.measured, ratio);
    if (norm2(c.members.back()) > 4 * norm2(c.members.front())) {
      rep.pass = false;
      rep.detail = "cluster " + std::to_string(a) + " not dyadic: " +
                   cluster_brief(c, p.matrix().dim());
      return rep;
    }
  }
  return rep;
}

CertificateReport certify_separation(const ClusterPartition& p) {
  const ModeBall& pb = p.padded_ball();
  const DispersionMatrix& A = p.matrix();
  const double c_d = p.c_d();
  const bool half = c_d == 0.5;
  std::int64_t r2 = std::int64_t(p.radius()) * p.radius();

  std::vector<Mode> md;
  std::vector<double> nr, lm;
  std::vector<std::int32_t> cl;
  std::vector<char> intr;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    const Mode& m = pb.mode(i);
    if (norm2(m) > r2) continue;
    int c = p.cluster_of_index(i);
    md.push_back(m);
    nr.push_back(norm(m));
    lm.push_back(A.eigenvalue_sq(m));
    cl.push_back(std::int32_t(c));
    intr.push_back(p.clusters()[std::size_t(c)].interior ? 1 : 0);
  }

  CertificateReport rep;
  rep.pass = true;
  double minmargin = std::numeric_limits<double>::infinity();
  const std::size_t n = md.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!intr[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cl[j] == cl[i] || !intr[j]) continue;
      double lhs = norm(sub(md[i], md[j])) + std::fabs(lm[i] - lm[j]);
      double s = nr[i] + nr[j];
      double thr = half ? std::sqrt(s) : std::pow(s, c_d);
      double margin = lhs - thr;
      ++rep.checked;
      if (margin < minmargin) minmargin = margin;
      if (margin <= 0) {
        rep.pass = false;
        rep.measured = margin;
        rep.detail = "separation fails for " + mode_to_string(md[i], A.dim()) + " vs " +
                     mode_to_string(md[j], A.dim());
        return rep;
      }
    }
  }
  rep.measured = rep.checked ? minmargin : 0.0;
  return rep;
}

CertificateReport certify_norm_equivalence(const ClusterPartition& p, double s, int states,
                                           std::uint64_t seed) {
  CertificateReport rep;
  ModeBall sball(p.matrix().dim(), p.radius());

  // Termwise precondition: K <= max(1,|n|) <= 2K on the state ball.
  for (const Mode& m : sball.modes()) {
    double k = p.weight_of_mode(m);
    double mx = std::max(1.0, norm(m));
    if (!(k <= mx * (1 + 1e-12)) || !(mx <= 2.0 * k * (1 + 1e-12))) {
      rep.pass = false;
      rep.detail = "weight/norm bound fails at mode " + mode_to_string(m, p.matrix().dim());
      return rep;
    }
  }

  std::mt19937_64 g(seed);
  double lo = std::pow(2.0, -s);
  double worst = 0;
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0;
  std::vector<std::complex<double>> a(sball.size());
  for (int st = 0; st < states; ++st) {
    for (auto& v : a) v = normal_complex(g);
    double ch = cluster_norm_hs(p, sball, a, s);
    double sh = sobolev_norm_hs(sball, a, s);
    double r = ch / sh;
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    worst = std::max({worst, r - 1.0, lo - r});
    ++rep.checked;
  }
  rep.measured = worst;
  rep.pass = worst <= 1e-12;
  rep.detail = "ratio range [" + fmt_g17(rmin) + ", " + fmt_g17(rmax) + "] vs [" + fmt_g17(lo) +
               ", 1]";
  return rep;
}

CertificateReport certify_truncation_stability(const ClusterPartition& base,
                                               const ClusterPartition& doubled) {
  if (doubled.radius() != 2 * base.radius() || !(doubled.matrix() == base.matrix()) ||
      doubled.c_d() != base.c_d())
    throw std::invalid_argument(
        "truncation stability: doubled partition must share A and c_d at twice the radius");
  CertificateReport rep;
  rep.pass = true;
  for (std::size_t a = 0; a < base.clusters().size(); ++a) {
    const Cluster& c = base.clusters()[a];
    if (!c.interior) continue;
    int b = doubled.cluster_of(c.members.front());
    const Cluster& d = doubled.clusters()[std::size_t(b)];
    ++rep.checked;
    if (c.members != d.members || c.weight != d.weight) {
      rep.pass = false;
      rep.detail = "interior cluster " + std::to_string(a) +
                   " changed when rebuilt at doubled radius: " +
                   cluster_brief(c, base.matrix().dim()) + " -> " +
                   cluster_brief(d, base.matrix().dim());
      return rep;
    }
  }
  rep.measured = double(rep.checked);
  return rep;
}

double cluster_norm_hs(const ClusterPartition& p, const ModeBall& state_ball,
                       std::span<const std::complex<double>> a, double s) {
  if (a.size() != state_ball.size())
    throw std::invalid_argument("cluster_norm_hs: state size mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double k = p.weight_of_mode(state_ball.mode(i));
    sum += std::pow(k, 2.0 * s) * std::norm(a[i]);
  }
  return std::sqrt(sum);
}

double sobolev_norm_hs(const ModeBall& state_ball, std::span<const std::complex<double>> a,
                       double s) {
  if (a.size() != state_ball.size())
    throw std::invalid_argument("sobolev_norm_hs: state size mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double k = std::max(1.0, norm(state_ball.mode(i)));
    sum += std::pow(k, 2.0 * s) * std::norm(a[i]);
  }
  return std::sqrt(sum);
}

void save_partition_csv(const ClusterPartition& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_partition_csv: cannot open " + path);
  int dim = p.matrix().dim();
  f << "# diowave-partition,v1\n";
  f << "# dim," << dim << "\n";
  f << "# radius," << p.radius() << "\n";
  f << "# c_d," << fmt_g17(p.c_d()) << "\n";
  f << "# matrix,";
  std::vector<double> es = p.matrix().entries();
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (i) f << ';';
    f << fmt_g17(es[i]);
  }
  f << "\n# clusters," << p.clusters().size() << "\n";
  f << "mode,cluster,weight,interior\n";
  const ModeBall& pb = p.padded_ball();
  for (std::size_t i = 0; i < pb.size(); ++i) {
    int c = p.cluster_of_index(i);
    const Cluster& cl = p.clusters()[std::size_t(c)];
    f << mode_to_string(pb.mode(i), dim) << ',' << c << ',' << fmt_g17(cl.weight) << ','
      << (cl.interior ? 1 : 0) << '\n';
  }
  if (!f) throw std::runtime_error("save_partition_csv: write failed for " + path);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("partition csv: bad number '" + s + "'");
  return v;
}

Mode parse_mode(const std::string& s, int dim) {
  std::vector<std::string> parts = split(s, ';');
  if (int(parts.size()) != dim) throw std::runtime_error("partition csv: bad mode '" + s + "'");
  Mode m{0, 0, 0};
  for (int i = 0; i < dim; ++i) m[i] = std::stoi(parts[i]);
  return m;
}

std::string header_value(const std::string& line, const std::string& key) {
  std::string prefix = "# " + key + ",";
  if (line.rfind(prefix, 0) != 0)
    throw std::runtime_error("partition csv: expected header '" + key + "', got '" + line + "'");
  return line.substr(prefix.size());
}

}  // namespace

ClusterPartition load_partition_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_partition_csv: cannot open " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(f, line)) throw std::runtime_error("partition csv: truncated file");
  };

  next_line();
  if (line != "# diowave-partition,v1")
    throw std::runtime_error("partition csv: bad magic line '" + line + "'");
  next_line();
  int dim = std::stoi(header_value(line, "dim"));
  next_line();
  int radius = std::stoi(header_value(line, "radius"));
  next_line();
  double c_d = parse_double(header_value(line, "c_d"));
  next_line();
  std::vector<std::string> ms = split(header_value(line, "matrix"), ';');
  std::vector<double> entries;
  for (const std::string& e : ms) entries.push_back(parse_double(e));
  DispersionMatrix A(dim, entries);
  next_line();
  std::size_t n_clusters = std::stoul(header_value(line, "clusters"));
  next_line();
  if (line != "mode,cluster,weight,interior")
    throw std::runtime_error("partition csv: bad column header '" + line + "'");

  ModeBall padded(dim, 2 * radius);
  std::vector<std::int32_t> cl_of(padded.size(), -1);
  std::vector<Cluster> clusters(n_clusters);
  std::vector<double> weights(n_clusters, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> interiors(n_clusters, -1);
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts = split(line, ',');
    if (parts.size() != 4) throw std::runtime_error("partition csv: bad row '" + line + "'");
    Mode m = parse_mode(parts[0], dim);
    int idx = padded.index(m);
    if (idx < 0)
      throw std::runtime_error("partition csv: mode outside padded ball: " + parts[0]);
    std::size_t cid = std::stoul(parts[1]);
    if (cid >= n_clusters) throw std::runtime_error("partition csv: cluster id out of range");
    if (cl_of[std::size_t(idx)] != -1)
      throw std::runtime_error("partition csv: duplicate mode row: " + parts[0]);
    cl_of[std::size_t(idx)] = std::int32_t(cid);
    double w = parse_double(parts[2]);
    int intr = std::stoi(parts[3]);
    if (std::isnan(weights[cid])) {
      weights[cid] = w;
      interiors[cid] = intr;
    } else if (weights[cid] != w || interiors[cid] != intr) {
      throw std::runtime_error("partition csv: inconsistent cluster metadata for id " +
                               parts[1]);
    }
    ++rows;
  }
  if (rows != padded.size())
    throw std::runtime_error("partition csv: row count does not cover the padded ball");

  // Members in ball order (sorted); derived fields are re-checked downstream.
  for (std::size_t i = 0; i < padded.size(); ++i)
    clusters[std::size_t(cl_of[i])].members.push_back(padded.mode(i));
  for (std::size_t c = 0; c < n_clusters; ++c) {
    if (clusters[c].members.empty())
      throw std::runtime_error("partition csv: empty cluster id " + std::to_string(c));
    clusters[c].weight = weights[c];
    clusters[c].interior = interiors[c] != 0;
    clusters[c].origin = is_zero(clusters[c].members.front());
    clusters[c].min_abs = norm(clusters[c].members.front());
    clusters[c].max_abs = norm(clusters[c].members.back());
  }
  return ClusterPartition::from_parts(A, radius, c_d, std::move(clusters), std::move(cl_of));
}

}  // namespace diowave
