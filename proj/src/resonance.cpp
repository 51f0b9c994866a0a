#include "diowave/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "diowave/format.hpp"
#include "diowave/rng.hpp"

namespace diowave {

namespace {

// Linear address of an integer vector inside the box [-3R, 3R]^d, split so
// that per-mode partial sums compose additively: lin(n1 - n2 + n3) =
// lin0(n1) - lin0(n2) + lin0(n3) + shift.
struct BoxAddress {
  int dim, span, side;
  std::int64_t shift = 0;
  std::array<std::int64_t, kMaxDim> stride{};

  BoxAddress(int d, int radius_span) : dim(d), span(radius_span), side(2 * radius_span + 1) {
    std::int64_t s = 1;
    for (int k = dim - 1; k >= 0; --k) {
      stride[std::size_t(k)] = s;
      shift += s * span;
      s *= side;
    }
  }
  std::int64_t cells() const {
    std::int64_t s = 1;
    for (int k = 0; k < dim; ++k) s *= side;
    return s;
  }
  std::int64_t lin0(const Mode& m) const {
    std::int64_t s = 0;
    for (int k = 0; k < dim; ++k) s += stride[std::size_t(k)] * m[std::size_t(k)];
    return s;
  }
};

void check_index_args(double theta, double alpha0_const) {
  if (!(theta > 0.0) || !(theta < 1.0))
    throw std::invalid_argument("quasi-resonant index: theta must lie in (0, 1)");
  if (!(alpha0_const > 0.0))
    throw std::invalid_argument("quasi-resonant index: cutoff constant must be positive");
}

void sort_triples(std::vector<QuasiTriple>& v) {
  std::sort(v.begin(), v.end(), [](const QuasiTriple& a, const QuasiTriple& b) {
    if (a.i1 != b.i1) return a.i1 < b.i1;
    if (a.i2 != b.i2) return a.i2 < b.i2;
    return a.i3 < b.i3;
  });
}

// Candidate low modes |m|^2 < cutoff_sq, as ball indices into `ball`.
std::vector<std::int32_t> low_mode_indices(const ModeBall& ball, double cutoff_sq) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    if (double(norm2(ball.mode(i))) < cutoff_sq) out.push_back(std::int32_t(i));
  }
  return out;
}

}  // namespace

ResonantSet enumerate_resonant_set(const DispersionMatrix& A, int radius, double tol,
                                   std::size_t cap) {
  if (radius < 1) throw std::invalid_argument("resonant set: radius must be >= 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("resonant set: tolerance must be >= 0");

  const ModeBall ball(A.dim(), radius);
  const std::size_t m = ball.size();

  std::vector<double> lam(m);
  std::vector<std::int64_t> lin(m);
  const BoxAddress box(A.dim(), 3 * radius);
  std::vector<double> lam_box(std::size_t(box.cells()));
  for (std::size_t i = 0; i < m; ++i) {
    lam[i] = A.eigenvalue_sq(ball.mode(i));
    lin[i] = box.lin0(ball.mode(i));
  }
  {
    Mode v{};
    std::vector<int> c(std::size_t(A.dim()), -box.span);
    for (;;) {
      for (int k = 0; k < A.dim(); ++k) v[std::size_t(k)] = c[std::size_t(k)];
      lam_box[std::size_t(box.lin0(v) + box.shift)] = A.eigenvalue_sq(v);
      int k = A.dim() - 1;
      while (k >= 0 && ++c[std::size_t(k)] > box.span) c[std::size_t(k--)] = -box.span;
      if (k < 0) break;
    }
  }

  ResonantSet set;
  set.dim = A.dim();
  set.radius = radius;
  set.tol = tol;

  for (std::size_t i1 = 0; i1 < m; ++i1) {
    for (std::size_t i2 = 0; i2 < m; ++i2) {
      if (i1 == i2) {
        // n1 = n2 makes Omega vanish identically over every n3.
        set.member_count += m;
        set.pairing_count += m;
        continue;
      }
      const double l12 = lam[i1] - lam[i2];
      const std::int64_t base = lin[i1] - lin[i2] + box.shift;
      for (std::size_t i3 = 0; i3 < m; ++i3) {
        const double om = l12 + lam[i3] - lam_box[std::size_t(base + lin[i3])];
        if (std::fabs(om) <= tol) {
          ++set.member_count;
          if (i2 == i3) {
            ++set.pairing_count;
          } else {
            ++set.non_pairing_count;
            if (set.non_pairing.size() < cap) {
              set.non_pairing.push_back(
                  make_interaction(ball.mode(i1), ball.mode(i2), ball.mode(i3)));
            } else {
              set.truncated = true;
            }
          }
        }
      }
    }
  }
  set.trivial_only = set.non_pairing_count == 0;
  return set;
}

bool resonant_member(const DispersionMatrix& A, const ResonantSet& set, const Quadruple& q) {
  if (!zero_momentum(q)) return false;
  const std::int64_t r2 = std::int64_t(set.radius) * set.radius;
  if (norm2(q.n1) > r2 || norm2(q.n2) > r2 || norm2(q.n3) > r2) return false;
  return std::fabs(resonant_value(A, q)) <= set.tol;
}

SumIdentityCheck resonant_sum_identity_check(const ResonantSet& set, const ModeBall& ball,
                                             std::span<const std::complex<double>> a) {
  if (ball.dim() != set.dim || ball.radius() != set.radius)
    throw std::invalid_argument("resonant sum: ball does not match the enumerated set");
  if (a.size() != ball.size())
    throw std::invalid_argument("resonant sum: amplitude count does not match the ball");
  if (!set.trivial_only)
    throw std::logic_error("resonant sum: identity applies to trivial sets only");
  const std::size_t m = ball.size();
  if (set.member_count != 2 * m * m - m)
    throw std::logic_error("resonant sum: member count is not the full pairing family");

  // Pairing family: (k, k, j, j), (j, k, k, j), overlap at k = j.
  std::complex<double> lhs = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      lhs += a[k] * std::conj(a[k]) * a[j] * std::conj(a[j]);
      lhs += a[j] * std::conj(a[k]) * a[k] * std::conj(a[j]);
    }
    lhs -= a[k] * std::conj(a[k]) * a[k] * std::conj(a[k]);
  }

  double mass = 0.0, quartic = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double p = std::norm(a[k]);
    mass += p;
    quartic += p * p;
  }
  const double rhs = 2.0 * mass * mass - quartic;

  SumIdentityCheck out;
  out.lhs = lhs;
  out.rhs = rhs;
  const double scale = std::max(std::fabs(rhs), 1e-300);
  out.rel_error = std::abs(lhs - rhs) / scale;
  return out;
}

QuasiResonantIndex build_quasi_resonant_index(const ClusterPartition& p, double theta,
                                              double alpha0_const) {
  check_index_args(theta, alpha0_const);
  const DispersionMatrix& A = p.matrix();
  const int radius = p.radius();

  QuasiResonantIndex idx;
  idx.state_ball = std::make_shared<const ModeBall>(A.dim(), radius);
  idx.theta = theta;
  idx.alpha0_const = alpha0_const;
  idx.alpha0 = p.high_frequency_cutoff(alpha0_const);

  const ModeBall& ball = *idx.state_ball;
  const std::size_t m = ball.size();
  idx.is_high.resize(m, 0);
  idx.lambda1.resize(m);
  idx.lambda3.resize(m);

  const std::int64_t r2 = std::int64_t(radius) * radius;
  for (std::size_t in = 0; in < m; ++in) {
    const Mode& n = ball.mode(in);
    if (!p.high_frequency(n, alpha0_const)) continue;
    idx.is_high[in] = 1;

    const int alpha = p.cluster_of(n);
    const double b2 = low_cutoff_sq(theta, p.weight_of(alpha));
    const std::vector<std::int32_t> low = low_mode_indices(ball, b2);

    for (const Mode& n1 : p.cluster(alpha).members) {
      if (norm2(n1) > r2) continue;
      const std::int32_t i1 = std::int32_t(ball.index(n1));
      const Mode base = sub(n, n1);
      for (std::int32_t i2 : low) {
        const Mode n3 = add(base, ball.mode(std::size_t(i2)));
        if (double(norm2(n3)) >= b2) continue;
        const Quadruple q{n1, ball.mode(std::size_t(i2)), n3, n};
        const double om = resonant_value(A, q);
        if (std::fabs(om) < 1.0)
          idx.lambda1[in].push_back({i1, i2, std::int32_t(ball.index(n3)), om});
      }
    }
    for (const Mode& n3 : p.cluster(alpha).members) {
      if (norm2(n3) > r2) continue;
      const std::int32_t i3 = std::int32_t(ball.index(n3));
      const Mode base = sub(n, n3);
      for (std::int32_t i2 : low) {
        const Mode n1 = add(base, ball.mode(std::size_t(i2)));
        if (double(norm2(n1)) >= b2) continue;
        const Quadruple q{n1, ball.mode(std::size_t(i2)), n3, n};
        const double om = resonant_value(A, q);
        if (std::fabs(om) < 1.0)
          idx.lambda3[in].push_back({std::int32_t(ball.index(n1)), i2, i3, om});
      }
    }
    sort_triples(idx.lambda1[in]);
    sort_triples(idx.lambda3[in]);
    idx.triple_count += idx.lambda1[in].size() + idx.lambda3[in].size();
  }
  idx.empty_warning = idx.triple_count == 0;
  return idx;
}

namespace {

bool lambda_branch(const ClusterPartition& p, double theta, double alpha0_const,
                   const Quadruple& q, bool branch1) {
  if (!zero_momentum(q)) return false;
  const std::int64_t r2 = std::int64_t(p.radius()) * p.radius();
  if (norm2(q.n1) > r2 || norm2(q.n2) > r2 || norm2(q.n3) > r2 || norm2(q.n) > r2)
    return false;
  if (!p.high_frequency(q.n, alpha0_const)) return false;
  const int alpha = p.cluster_of(q.n);
  const Mode& clustered = branch1 ? q.n1 : q.n3;
  if (p.cluster_of(clustered) != alpha) return false;
  const double b2 = low_cutoff_sq(theta, p.weight_of(alpha));
  if (double(norm2(q.n2)) >= b2) return false;
  const Mode& small3 = branch1 ? q.n3 : q.n1;
  if (double(norm2(small3)) >= b2) return false;
  return std::fabs(resonant_value(p.matrix(), q)) < 1.0;
}

}  // namespace

bool in_lambda1(const ClusterPartition& p, double theta, double alpha0_const,
                const Quadruple& q) {
  return lambda_branch(p, theta, alpha0_const, q, true);
}

bool in_lambda3(const ClusterPartition& p, double theta, double alpha0_const,
                const Quadruple& q) {
  return lambda_branch(p, theta, alpha0_const, q, false);
}

DivisorLedger divisor_ledger(const ClusterPartition& p, const QuasiResonantIndex& idx,
                             double s, double tau, std::size_t samples, std::uint64_t seed,
                             std::size_t row_cap) {
  if (!(s > 0.0)) throw std::invalid_argument("divisor ledger: s must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("divisor ledger: tau must be positive");
  const ModeBall& ball = *idx.state_ball;
  if (ball.dim() != p.matrix().dim() || ball.radius() != p.radius())
    throw std::invalid_argument("divisor ledger: index does not match the partition");

  DivisorLedger led;
  led.dim = ball.dim();
  led.s = s;
  led.tau = tau;
  led.c_d = p.c_d();
  led.theta = idx.theta;
  led.alpha0_const = idx.alpha0_const;
  led.seed = seed;
  led.samples_requested = samples;

  std::vector<std::size_t> high;
  for (std::size_t i = 0; i < ball.size(); ++i)
    if (idx.high(i)) high.push_back(i);
  if (high.empty() || samples == 0) return led;

  const double rearr_exp = 4.0 * tau / p.c_d();
  const std::int64_t r2 = std::int64_t(p.radius()) * p.radius();
  const std::size_t max_draws = 50 * samples;
  std::mt19937_64 gen(seed);

  std::vector<double> ratios;
  ratios.reserve(samples);
  double sum = 0.0;

  while (led.accepted < samples && led.draws < max_draws) {
    ++led.draws;
    const Mode& n = ball.mode(high[uniform_index(gen, high.size())]);
    const Mode& n1 = ball.mode(uniform_index(gen, ball.size()));
    const Mode& n2 = ball.mode(uniform_index(gen, ball.size()));
    const Mode n3 = add(sub(n, n1), n2);
    if (norm2(n3) > r2) continue;
    const Quadruple q{n1, n2, n3, n};
    const double om = resonant_value(p.matrix(), q);
    if (om == 0.0) continue;

    double a1 = norm(n1), a2 = norm(n2), a3 = norm(n3);
    if (a1 < a2) std::swap(a1, a2);
    if (a2 < a3) std::swap(a2, a3);
    if (a1 < a2) std::swap(a1, a2);
    if (a2 == 0.0) continue;  // two incoming modes at the origin
    if (in_lambda1(p, idx.theta, idx.alpha0_const, q) ||
        in_lambda3(p, idx.theta, idx.alpha0_const, q))
      continue;

    const double weight = p.weight_of_mode(n);
    const double ratio =
        (std::pow(weight, s) / std::fabs(om)) / (std::pow(a1, s) * std::pow(a2, rearr_exp));

    DivisorSample sample{q, om, weight, ratio};
    if (led.accepted == 0 || ratio > led.max_ratio) {
      led.max_ratio = ratio;
      led.argmax = sample;
    }
    if (led.rows.size() < row_cap) led.rows.push_back(sample);
    ratios.push_back(ratio);
    sum += ratio;
    ++led.accepted;
  }
  led.exhausted = led.accepted < samples;

  if (led.accepted > 0) {
    led.mean_ratio = sum / double(led.accepted);
    std::sort(ratios.begin(), ratios.end());
    auto quant = [&](double f) {
      return ratios[std::size_t(f * double(ratios.size() - 1))];
    };
    led.q50 = quant(0.50);
    led.q90 = quant(0.90);
    led.q99 = quant(0.99);
  }

  // Exhaustive core: each (big, u, v) triple is tested in the three input
  // positions, so every quadruple with two inputs inside the small ball is
  // reached. Powers are table lookups on |m|^2 and the branch predicates run
  // only for would-be maxima, keeping the sweep arithmetic-bound.
  const int core_r = std::min(ball.dim() == 2 ? 7 : 2, p.radius());
  led.core_small_radius = core_r;
  const ModeBall small(ball.dim(), core_r);
  const DispersionMatrix& A = p.matrix();

  std::vector<double> weight_s(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i)
    weight_s[i] = std::pow(p.weight_of_mode(ball.mode(i)), s);
  std::vector<double> pow_s(std::size_t(r2) + 1), pow_rearr(std::size_t(r2) + 1);
  for (std::size_t m2 = 0; m2 <= std::size_t(r2); ++m2) {
    pow_s[m2] = std::pow(double(m2), 0.5 * s);
    pow_rearr[m2] = std::pow(double(m2), 0.5 * rearr_exp);
  }

  const auto consider = [&](const Mode& n1, const Mode& n2, const Mode& n3) {
    const std::int64_t i1 = norm2(n1), i2 = norm2(n2), i3 = norm2(n3);
    std::int64_t b1 = i1, b2 = i2;
    if (b1 < b2) std::swap(b1, b2);
    if (i3 > b1) {
      b2 = b1;
      b1 = i3;
    } else if (i3 > b2) {
      b2 = i3;
    }
    if (b2 == 0) return;  // two incoming modes at the origin
    const Mode n = add(sub(n1, n2), n3);
    if (norm2(n) > r2) return;
    const int in = ball.index(n);
    if (in < 0 || !idx.high(std::size_t(in))) return;
    const Quadruple q{n1, n2, n3, n};
    const double om = resonant_value(A, q);
    if (om == 0.0) return;
    const double ratio = (weight_s[std::size_t(in)] / std::fabs(om)) /
                         (pow_s[std::size_t(b1)] * pow_rearr[std::size_t(b2)]);
    ++led.core_candidates;
    if (ratio <= led.core_max_ratio) return;
    if (in_lambda1(p, idx.theta, idx.alpha0_const, q) ||
        in_lambda3(p, idx.theta, idx.alpha0_const, q))
      return;
    led.core_max_ratio = ratio;
    led.core_argmax = DivisorSample{q, om, p.weight_of_mode(n), ratio};
  };

  for (std::size_t iu = 0; iu < small.size(); ++iu) {
    const Mode& u = small.mode(iu);
    for (std::size_t iv = 0; iv < small.size(); ++iv) {
      const Mode& v = small.mode(iv);
      for (std::size_t ib = 0; ib < ball.size(); ++ib) {
        const Mode& b = ball.mode(ib);
        consider(b, u, v);
        consider(u, b, v);
        consider(u, v, b);
      }
    }
  }

  if (led.core_max_ratio > led.max_ratio || led.accepted == 0) {
    led.max_ratio = std::max(led.max_ratio, led.core_max_ratio);
    if (led.core_max_ratio > 0.0) led.argmax = led.core_argmax;
  }
  return led;
}

double normal_form_weight(const ClusterPartition& p, const QuasiResonantIndex& idx,
                          const Quadruple& q, double omega_tol) {
  const double om = resonant_value(p.matrix(), q);
  if (std::fabs(om) <= omega_tol)
    throw std::domain_error("normal form weight: resonance value is zero within tolerance");
  if (in_lambda1(p, idx.theta, idx.alpha0_const, q) ||
      in_lambda3(p, idx.theta, idx.alpha0_const, q))
    throw std::domain_error("normal form weight: quasi-resonant terms keep their phase");
  return 1.0 / om;
}

namespace {

std::string quad_fields(const Quadruple& q, int dim) {
  return mode_to_string(q.n1, dim) + ',' + mode_to_string(q.n2, dim) + ',' +
         mode_to_string(q.n3, dim) + ',' + mode_to_string(q.n, dim);
}

}  // namespace

void save_resonant_set_csv(const DispersionMatrix& A, const ResonantSet& set,
                           const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-resonant-set,v1\n";
  f << "# dim," << set.dim << "\n";
  f << "# radius," << set.radius << "\n";
  f << "# tol," << fmt_g17(set.tol) << "\n";
  f << "# members," << set.member_count << "\n";
  f << "# pairings," << set.pairing_count << "\n";
  f << "# non_pairings," << set.non_pairing_count << "\n";
  f << "# truncated," << (set.truncated ? 1 : 0) << "\n";
  f << "# trivial_only," << (set.trivial_only ? 1 : 0) << "\n";
  f << "n1,n2,n3,n,omega\n";
  for (const Quadruple& q : set.non_pairing)
    f << quad_fields(q, set.dim) << ',' << fmt_g17(resonant_value(A, q)) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

void save_quasi_index_csv(const QuasiResonantIndex& idx, const std::string& path) {
  const ModeBall& ball = *idx.state_ball;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-quasi-index,v1\n";
  f << "# dim," << ball.dim() << "\n";
  f << "# radius," << ball.radius() << "\n";
  f << "# theta," << fmt_g17(idx.theta) << "\n";
  f << "# alpha0_const," << fmt_g17(idx.alpha0_const) << "\n";
  f << "# alpha0," << idx.alpha0 << "\n";
  f << "# triples," << idx.triple_count << "\n";
  f << "branch,n,n1,n2,n3,omega\n";
  auto rows = [&](int branch, std::size_t in, const std::vector<QuasiTriple>& v) {
    for (const QuasiTriple& t : v) {
      f << branch << ',' << mode_to_string(ball.mode(in), ball.dim()) << ','
        << mode_to_string(ball.mode(std::size_t(t.i1)), ball.dim()) << ','
        << mode_to_string(ball.mode(std::size_t(t.i2)), ball.dim()) << ','
        << mode_to_string(ball.mode(std::size_t(t.i3)), ball.dim()) << ','
        << fmt_g17(t.omega) << "\n";
    }
  };
  for (std::size_t in = 0; in < ball.size(); ++in) rows(1, in, idx.lambda1[in]);
  for (std::size_t in = 0; in < ball.size(); ++in) rows(3, in, idx.lambda3[in]);
  if (!f) throw std::runtime_error("write failed: " + path);
}

void save_divisor_ledger_csv(const DivisorLedger& led, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-divisor-ledger,v1\n";
  f << "# dim," << led.dim << "\n";
  f << "# s," << fmt_g17(led.s) << "\n";
  f << "# tau," << fmt_g17(led.tau) << "\n";
  f << "# c_d," << fmt_g17(led.c_d) << "\n";
  f << "# theta," << fmt_g17(led.theta) << "\n";
  f << "# alpha0_const," << fmt_g17(led.alpha0_const) << "\n";
  f << "# seed," << led.seed << "\n";
  f << "# samples_requested," << led.samples_requested << "\n";
  f << "# accepted," << led.accepted << "\n";
  f << "# draws," << led.draws << "\n";
  f << "# exhausted," << (led.exhausted ? 1 : 0) << "\n";
  f << "# max_ratio," << fmt_g17(led.max_ratio) << "\n";
  f << "# mean_ratio," << fmt_g17(led.mean_ratio) << "\n";
  f << "# q50," << fmt_g17(led.q50) << "\n";
  f << "# q90," << fmt_g17(led.q90) << "\n";
  f << "# q99," << fmt_g17(led.q99) << "\n";
  f << "# core_small_radius," << led.core_small_radius << "\n";
  f << "# core_candidates," << led.core_candidates << "\n";
  f << "# core_max_ratio," << fmt_g17(led.core_max_ratio) << "\n";
  f << "n1,n2,n3,n,omega,weight,ratio\n";
  for (const DivisorSample& r : led.rows) {
    f << quad_fields(r.q, led.dim) << ',' << fmt_g17(r.omega) << ',' << fmt_g17(r.weight)
      << ',' << fmt_g17(r.ratio) << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace diowave
