#include "diowave/effective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "diowave/format.hpp"

namespace diowave {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

Complex phase(double angle) { return Complex(std::cos(angle), std::sin(angle)); }

std::vector<int> fft_dims(int dim, int radius) {
  const int ny = fft_friendly_size(4 * radius + 2);
  return std::vector<int>(std::size_t(dim), ny);
}

}  // namespace

ToroidalState make_toroidal_state(std::shared_ptr<const ModeBall> ball, double time) {
  ToroidalState s;
  s.a.assign(ball->size(), Complex(0.0));
  s.ball = std::move(ball);
  s.time = time;
  return s;
}

EffectiveWaveguideState make_effective_state(std::shared_ptr<const ModeBall> ball,
                                             std::vector<double> xi, double time) {
  if (xi.empty()) throw std::invalid_argument("effective state: xi grid must be nonempty");
  EffectiveWaveguideState s;
  s.g.assign(ball->size() * xi.size(), Complex(0.0));
  s.ball = std::move(ball);
  s.xi = std::move(xi);
  s.time = time;
  return s;
}

void toroidal_rhs(const QuasiResonantIndex& idx, std::span<const Complex> a, double t,
                  std::span<Complex> out) {
  const std::size_t m = idx.state_ball->size();
  if (a.size() != m || out.size() != m)
    throw std::invalid_argument("toroidal rhs: amplitude size does not match the index ball");
  for (std::size_t n = 0; n < m; ++n) {
    Complex sum(0.0);
    for (const QuasiTriple& tr : idx.lambda1[n]) {
      sum += phase(-t * tr.omega) * a[std::size_t(tr.i1)] *
             std::conj(a[std::size_t(tr.i2)]) * a[std::size_t(tr.i3)];
    }
    out[n] = Complex(0.0, -2.0) * sum;
  }
}

void full_toroidal_rhs_naive(const DispersionMatrix& A, const ModeBall& ball,
                             std::span<const Complex> a, double t, std::span<Complex> out) {
  const std::size_t m = ball.size();
  if (a.size() != m || out.size() != m)
    throw std::invalid_argument("full toroidal rhs: amplitude size does not match the ball");
  for (std::size_t n = 0; n < m; ++n) out[n] = Complex(0.0);
  for (std::size_t i1 = 0; i1 < m; ++i1) {
    for (std::size_t i2 = 0; i2 < m; ++i2) {
      const Mode base = sub(ball.mode(i1), ball.mode(i2));
      const Complex pair = a[i1] * std::conj(a[i2]);
      for (std::size_t i3 = 0; i3 < m; ++i3) {
        const Mode n = add(base, ball.mode(i3));
        const int in = ball.index(n);
        if (in < 0) continue;
        const Quadruple q{ball.mode(i1), ball.mode(i2), ball.mode(i3), n};
        out[std::size_t(in)] +=
            Complex(0.0, -1.0) * phase(-t * resonant_value(A, q)) * pair * a[i3];
      }
    }
  }
}

FullToroidalRhs::FullToroidalRhs(const DispersionMatrix& A,
                                 std::shared_ptr<const ModeBall> ball)
    : ball_(std::move(ball)), fft_(A.dim(), fft_dims(A.dim(), ball_->radius())) {
  if (A.dim() != ball_->dim())
    throw std::invalid_argument("full toroidal rhs: matrix and ball dimensions differ");
  const int ny = fft_dims(A.dim(), ball_->radius()).front();
  const std::size_t m = ball_->size();
  lambda_.resize(m);
  box_index_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Mode& n = ball_->mode(i);
    lambda_[i] = A.eigenvalue_sq(n);
    std::size_t lin = 0;
    for (int k = 0; k < A.dim(); ++k) {
      const int w = ((n[std::size_t(k)] % ny) + ny) % ny;
      lin = lin * std::size_t(ny) + std::size_t(w);
    }
    box_index_[i] = lin;
  }
}

void FullToroidalRhs::operator()(std::span<const Complex> a, double t,
                                 std::span<Complex> out) {
  const std::size_t m = ball_->size();
  if (a.size() != m || out.size() != m)
    throw std::invalid_argument("full toroidal rhs: amplitude size does not match the ball");
  Complex* box = fft_.data();
  const std::size_t cells = fft_.size();
  for (std::size_t j = 0; j < cells; ++j) box[j] = Complex(0.0);
  for (std::size_t i = 0; i < m; ++i) box[box_index_[i]] = phase(-t * lambda_[i]) * a[i];
  fft_.backward();
  for (std::size_t j = 0; j < cells; ++j) box[j] *= std::norm(box[j]);
  fft_.forward();
  const double scale = 1.0 / double(cells);
  for (std::size_t i = 0; i < m; ++i)
    out[i] = Complex(0.0, -1.0) * phase(t * lambda_[i]) * (scale * box[box_index_[i]]);
}

void effective_rhs(const QuasiResonantIndex& idx, const EffectiveWaveguideState& g, double t,
                   std::span<Complex> out) {
  const std::size_t m = idx.state_ball->size();
  if (g.ball->size() != m || g.ball->radius() != idx.state_ball->radius())
    throw std::invalid_argument("effective rhs: state ball does not match the index ball");
  effective_rhs(idx, g.slices(), std::span<const Complex>(g.g), t, out);
}

void effective_rhs(const QuasiResonantIndex& idx, std::size_t slices,
                   std::span<const Complex> g, double t, std::span<Complex> out) {
  if (t < 1.0)
    throw std::invalid_argument("effective rhs: the flow is defined for t >= 1 only");
  const std::size_t m = idx.state_ball->size();
  if (slices < 1 || g.size() != m * slices || out.size() != g.size())
    throw std::invalid_argument("effective rhs: state size does not match slice layout");

  const double pit = kPi / t;
  for (std::size_t k = 0; k < slices; ++k) {
    std::span<const Complex> s = g.subspan(k * m, m);
    std::span<Complex> o = out.subspan(k * m, m);
    double mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) mass += std::norm(s[i]);
    for (std::size_t n = 0; n < m; ++n) {
      Complex rhs = pit * (2.0 * mass - std::norm(s[n])) * s[n];
      if (!idx.lambda1[n].empty()) {
        Complex q(0.0);
        for (const QuasiTriple& tr : idx.lambda1[n]) {
          q += phase(-t * tr.omega) * s[std::size_t(tr.i1)] *
               std::conj(s[std::size_t(tr.i2)]) * s[std::size_t(tr.i3)];
        }
        rhs += 2.0 * pit * q;
      }
      o[n] = Complex(0.0, -1.0) * rhs;
    }
  }
}

namespace {

// One classical RK4 step; k-buffers and the stage state are caller scratch.
template <class Rhs>
void rk4_step(const Rhs& rhs, double t, double h, std::vector<Complex>& y,
              std::vector<Complex>& stage, std::array<std::vector<Complex>, 4>& k) {
  const std::size_t n = y.size();
  rhs(t, y, k[0]);
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.5 * h * k[0][i];
  rhs(t + 0.5 * h, stage, k[1]);
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.5 * h * k[1][i];
  rhs(t + 0.5 * h, stage, k[2]);
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + h * k[2][i];
  rhs(t + h, stage, k[3]);
  const double w = h / 6.0;
  for (std::size_t i = 0; i < n; ++i)
    y[i] += w * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
}

std::size_t step_count(double t0, double t1, double h) {
  const long long steps = std::llround((t1 - t0) / h);
  return std::size_t(std::max<long long>(1, steps));
}

}  // namespace

EffectiveTrajectory integrate_effective(const EffectiveWaveguideState& g0,
                                        const QuasiResonantIndex& idx, double t0, double t1,
                                        double h, const IntegrateOptions& opts) {
  if (!(t0 >= 1.0) || !(t1 > t0) || !(h > 0.0))
    throw std::invalid_argument("integrate: need 1 <= t0 < t1 and h > 0");
  if (opts.sample_stride < 1)
    throw std::invalid_argument("integrate: sample stride must be >= 1");
  if (g0.ball->size() != idx.state_ball->size() ||
      g0.ball->radius() != idx.state_ball->radius())
    throw std::invalid_argument("integrate: state ball does not match the index ball");

  const std::size_t m = g0.ball->size();
  const std::size_t nslice = g0.slices();
  const std::size_t steps = step_count(t0, t1, h);
  const double hs = (t1 - t0) / double(steps);

  std::vector<double> mass0(nslice, 0.0);
  for (std::size_t k = 0; k < nslice; ++k) {
    std::span<const Complex> s = g0.slice(k);
    for (std::size_t i = 0; i < m; ++i) mass0[k] += std::norm(s[i]);
  }

  EffectiveWaveguideState cur = g0;
  cur.time = t0;
  EffectiveTrajectory traj;
  traj.times.push_back(t0);
  traj.samples.push_back(cur);

  auto rhs = [&](double t, const std::vector<Complex>& y, std::vector<Complex>& dy) {
    effective_rhs(idx, nslice, std::span<const Complex>(y), t, std::span<Complex>(dy));
  };

  std::vector<Complex> y = cur.g, stage(y.size());
  std::array<std::vector<Complex>, 4> k;
  for (auto& kv : k) kv.assign(y.size(), Complex(0.0));

  for (std::size_t step = 0; step < steps; ++step) {
    const double t = t0 + double(step) * hs;
    rk4_step(rhs, t, hs, y, stage, k);

    for (std::size_t kk = 0; kk < nslice; ++kk) {
      double mass = 0.0;
      for (std::size_t i = 0; i < m; ++i) mass += std::norm(y[kk * m + i]);
      const double den = std::max(mass0[kk], 1e-300);
      if (std::fabs(mass - mass0[kk]) > opts.mass_guard * den)
        throw std::runtime_error("integrate: slice " + std::to_string(kk) +
                                 " mass drifted beyond the guard at t = " +
                                 fmt_g17(t + hs) + "; reduce the step");
    }

    if ((step + 1) % std::size_t(opts.sample_stride) == 0 || step + 1 == steps) {
      cur.g = y;
      cur.time = t0 + double(step + 1) * hs;
      traj.times.push_back(cur.time);
      traj.samples.push_back(cur);
    }
  }
  return traj;
}

std::vector<std::pair<double, std::vector<Complex>>> integrate_rk4(
    const VectorRhs& rhs, std::span<const Complex> y0, double t0, double t1, double h,
    int sample_stride) {
  if (!(t1 > t0) || !(h > 0.0))
    throw std::invalid_argument("integrate: need t0 < t1 and h > 0");
  if (sample_stride < 1) throw std::invalid_argument("integrate: sample stride must be >= 1");

  const std::size_t steps = step_count(t0, t1, h);
  const double hs = (t1 - t0) / double(steps);

  std::vector<Complex> y(y0.begin(), y0.end()), stage(y.size());
  std::array<std::vector<Complex>, 4> k;
  for (auto& kv : k) kv.assign(y.size(), Complex(0.0));

  auto wrapped = [&](double t, const std::vector<Complex>& yy, std::vector<Complex>& dy) {
    rhs(t, yy, dy);
  };

  std::vector<std::pair<double, std::vector<Complex>>> out;
  out.emplace_back(t0, y);
  for (std::size_t step = 0; step < steps; ++step) {
    rk4_step(wrapped, t0 + double(step) * hs, hs, y, stage, k);
    if ((step + 1) % std::size_t(sample_stride) == 0 || step + 1 == steps)
      out.emplace_back(t0 + double(step + 1) * hs, y);
  }
  return out;
}

EffectiveTrajectory wrap_toroidal_trajectory(
    std::shared_ptr<const ModeBall> ball,
    const std::vector<std::pair<double, std::vector<Complex>>>& samples) {
  EffectiveTrajectory traj;
  for (const auto& [t, a] : samples) {
    EffectiveWaveguideState s;
    s.ball = ball;
    s.xi = {0.0};
    s.time = t;
    s.g = a;
    traj.times.push_back(t);
    traj.samples.push_back(std::move(s));
  }
  return traj;
}

ConservationReport conservation_report(const ClusterPartition& p,
                                       const EffectiveTrajectory& traj, double s,
                                       double cutoff) {
  if (traj.samples.empty())
    throw std::invalid_argument("conservation report: empty trajectory");
  const EffectiveWaveguideState& first = traj.samples.front();
  const ModeBall& ball = *first.ball;
  if (ball.radius() != p.radius() || ball.dim() != p.matrix().dim())
    throw std::invalid_argument("conservation report: partition does not match the state");

  ConservationReport rep;
  rep.s = s;
  rep.cutoff = cutoff;
  rep.alpha0 = p.high_frequency_cutoff(cutoff);
  if (rep.alpha0 >= 0)
    for (int a = rep.alpha0; a < int(p.clusters().size()); ++a)
      rep.tracked_clusters.push_back(a);

  // Ball index -> position in tracked_clusters, or -1.
  std::vector<int> tracked_of(ball.size(), -1);
  for (std::size_t i = 0; i < ball.size(); ++i) {
    const int alpha = p.cluster_of(ball.mode(i));
    if (rep.alpha0 >= 0 && alpha >= rep.alpha0)
      tracked_of[i] = alpha - rep.alpha0;
  }

  const std::size_t nslice = first.slices();
  const std::size_t ntr = rep.tracked_clusters.size();
  const double dxi = first.xi.size() > 1 ? first.xi[1] - first.xi[0] : 1.0;

  for (std::size_t sidx = 0; sidx < traj.samples.size(); ++sidx) {
    const EffectiveWaveguideState& st = traj.samples[sidx];
    rep.times.push_back(traj.times[sidx]);
    std::vector<double> super(nslice * ntr, 0.0);
    double z = 0.0, hs2 = 0.0, hs_slice = 0.0;
    for (std::size_t k = 0; k < nslice; ++k) {
      std::span<const Complex> sl = st.slice(k);
      for (std::size_t i = 0; i < ball.size(); ++i)
        if (tracked_of[i] >= 0) super[k * ntr + std::size_t(tracked_of[i])] += std::norm(sl[i]);
      const double ch = cluster_norm_hs(p, ball, sl, s);
      z = std::max(z, ch);
      hs2 += ch * ch;
      hs_slice = std::max(hs_slice, sobolev_norm_hs(ball, sl, s));
    }
    rep.super_actions.push_back(std::move(super));
    rep.z_trace.push_back(z);
    rep.hs_trace.push_back(std::sqrt(dxi * hs2));
    rep.hs_slice_trace.push_back(hs_slice);
  }

  // Drifts relative to the first sample.
  std::vector<double> mass0(nslice, 0.0);
  for (std::size_t k = 0; k < nslice; ++k) {
    std::span<const Complex> sl = first.slice(k);
    for (std::size_t i = 0; i < ball.size(); ++i) mass0[k] += std::norm(sl[i]);
  }
  const std::vector<double>& s0 = rep.super_actions.front();
  for (std::size_t sidx = 1; sidx < rep.super_actions.size(); ++sidx) {
    const std::vector<double>& sv = rep.super_actions[sidx];
    for (std::size_t e = 0; e < sv.size(); ++e) {
      const double den = std::max(s0[e], std::max(1e-12 * mass0[e / ntr], 1e-300));
      rep.max_superaction_drift =
          std::max(rep.max_superaction_drift, std::fabs(sv[e] - s0[e]) / den);
    }
    rep.max_z_drift = std::max(
        rep.max_z_drift,
        std::fabs(rep.z_trace[sidx] - rep.z_trace[0]) / std::max(rep.z_trace[0], 1e-300));
    rep.max_hs_drift = std::max(
        rep.max_hs_drift,
        std::fabs(rep.hs_trace[sidx] - rep.hs_trace[0]) / std::max(rep.hs_trace[0], 1e-300));
  }
  return rep;
}

void save_conservation_csv(const ConservationReport& rep, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-conservation,v1\n";
  f << "# s," << fmt_g17(rep.s) << "\n";
  f << "# cutoff," << fmt_g17(rep.cutoff) << "\n";
  f << "# alpha0," << rep.alpha0 << "\n";
  f << "# max_superaction_drift," << fmt_g17(rep.max_superaction_drift) << "\n";
  f << "t,xi_index,cluster,super_action\n";
  const std::size_t ntr = rep.tracked_clusters.size();
  for (std::size_t sidx = 0; sidx < rep.super_actions.size(); ++sidx) {
    const std::vector<double>& sv = rep.super_actions[sidx];
    const std::size_t nslice = ntr == 0 ? 0 : sv.size() / ntr;
    for (std::size_t k = 0; k < nslice; ++k)
      for (std::size_t j = 0; j < ntr; ++j)
        f << fmt_g17(rep.times[sidx]) << ',' << k << ',' << rep.tracked_clusters[j] << ','
          << fmt_g17(sv[k * ntr + j]) << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

void save_norm_trace_csv(const ConservationReport& rep, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-norm-trace,v1\n";
  f << "# max_z_drift," << fmt_g17(rep.max_z_drift) << "\n";
  f << "# max_hs_drift," << fmt_g17(rep.max_hs_drift) << "\n";
  f << "t,z,hs,hs_max_slice\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    f << fmt_g17(rep.times[i]) << ',' << fmt_g17(rep.z_trace[i]) << ','
      << fmt_g17(rep.hs_trace[i]) << ',' << fmt_g17(rep.hs_slice_trace[i]) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace diowave
