#include "diowave/waveguide.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "diowave/fftw_util.hpp"
#include "diowave/format.hpp"

namespace diowave {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

Complex phase(double angle) { return Complex(std::cos(angle), std::sin(angle)); }

bool power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

// Plans and scratch for one grid shape. fold_fwd/fold_bwd are exact floating
// inverses (fold_bwd = 1 / (fold_fwd * nx)) so x round-trips reproduce inputs
// up to FFT round-off alone.
struct FieldFft {
  int nx, ny, modes;
  double fold_fwd, fold_bwd;
  BatchFft1D lines;                    // [mode][x] batch
  SmallFft box;                        // padded transverse box
  std::vector<std::size_t> box_index;  // ball mode -> box cell
  std::vector<Complex> scratch;

  FieldFft(const DispersionMatrix& A, const ModeBall& ball, int nx_, double dx)
      : nx(nx_),
        ny(fft_friendly_size(4 * ball.radius() + 2)),
        modes(int(ball.size())),
        fold_fwd(dx / (2.0 * kPi)),
        fold_bwd(1.0 / (fold_fwd * double(nx_))),
        lines(nx_, int(ball.size())),
        box(A.dim(), std::vector<int>(std::size_t(A.dim()), fft_friendly_size(4 * ball.radius() + 2))) {
    box_index.resize(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) {
      const Mode& n = ball.mode(i);
      std::size_t lin = 0;
      for (int k = 0; k < A.dim(); ++k) {
        const int w = ((n[std::size_t(k)] % ny) + ny) % ny;
        lin = lin * std::size_t(ny) + std::size_t(w);
      }
      box_index[i] = lin;
    }
  }

  std::size_t cells() const { return box.size(); }
};

std::shared_ptr<const WaveguideGrid> make_waveguide_grid(const DispersionMatrix& A,
                                                         double L, int nx, int radius) {
  if (!(L > 0.0)) throw std::invalid_argument("grid: L must be positive");
  if (!power_of_two(nx) || nx < 4)
    throw std::invalid_argument("grid: Nx must be a power of two >= 4");
  if (radius < 1) throw std::invalid_argument("grid: radius must be >= 1");

  auto g = std::make_shared<WaveguideGrid>(A);
  g->L = L;
  g->nx = nx;
  g->dx = 2.0 * L / double(nx);
  g->dxi = kPi / L;
  g->ball = std::make_shared<const ModeBall>(A.dim(), radius);
  g->x.resize(std::size_t(nx));
  g->xi.resize(std::size_t(nx));
  for (int j = 0; j < nx; ++j) g->x[std::size_t(j)] = -L + double(j) * g->dx;
  for (int k = 0; k < nx; ++k) {
    const int signed_k = k <= nx / 2 ? k : k - nx;
    g->xi[std::size_t(k)] = kPi * double(signed_k) / L;
  }
  g->lambda.resize(g->ball->size());
  for (std::size_t i = 0; i < g->ball->size(); ++i)
    g->lambda[i] = A.eigenvalue_sq(g->ball->mode(i));
  g->fft = std::make_shared<FieldFft>(A, *g->ball, nx, g->dx);
  return g;
}

WaveguideField make_field(std::shared_ptr<const WaveguideGrid> grid, Repr repr,
                          double time) {
  WaveguideField f;
  f.v.assign(grid->ball->size() * std::size_t(grid->nx), Complex(0.0));
  f.grid = std::move(grid);
  f.repr = repr;
  f.time = time;
  return f;
}

namespace {

void check_field(const WaveguideField& f, const char* who) {
  if (!f.grid) throw std::invalid_argument(std::string(who) + ": field has no grid");
  if (f.v.size() != f.grid->ball->size() * std::size_t(f.grid->nx))
    throw std::invalid_argument(std::string(who) + ": field storage size mismatch");
}

void require_fourier(const WaveguideField& f, const char* who) {
  check_field(f, who);
  if (f.repr != Repr::Fourier)
    throw std::invalid_argument(std::string(who) +
                                ": field must be in Fourier representation");
}

void require_same_grid(const WaveguideField& a, const WaveguideField& b,
                       const char* who) {
  if (a.grid != b.grid)
    throw std::invalid_argument(std::string(who) + ": fields must share one grid");
}

// x lines: physical f_j <-> true f_hat(xi_k); the (-1)^k fold converts the
// DFT's 0..nx-1 indexing to the symmetric grid starting at -L.
void lines_to_fourier(const WaveguideGrid& g, std::vector<Complex>& v) {
  FieldFft& e = *g.fft;
  const std::size_t nx = std::size_t(g.nx), m = g.ball->size();
  std::copy(v.begin(), v.end(), e.lines.data());
  e.lines.forward();
  const Complex* out = e.lines.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < nx; ++k)
      v[i * nx + k] = (k & 1 ? -e.fold_fwd : e.fold_fwd) * out[i * nx + k];
}

void lines_to_physical(const WaveguideGrid& g, std::vector<Complex>& v) {
  FieldFft& e = *g.fft;
  const std::size_t nx = std::size_t(g.nx), m = g.ball->size();
  Complex* in = e.lines.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < nx; ++k)
      in[i * nx + k] = (k & 1 ? -e.fold_bwd : e.fold_bwd) * v[i * nx + k];
  e.lines.backward();
  std::copy(e.lines.data(), e.lines.data() + m * nx, v.begin());
}

}  // namespace

void to_fourier(WaveguideField& f) {
  check_field(f, "to_fourier");
  if (f.repr == Repr::Fourier) return;
  lines_to_fourier(*f.grid, f.v);
  f.repr = Repr::Fourier;
}

void to_physical(WaveguideField& f) {
  check_field(f, "to_physical");
  if (f.repr == Repr::Physical) return;
  lines_to_physical(*f.grid, f.v);
  f.repr = Repr::Physical;
}

double field_mass(const WaveguideField& f) {
  check_field(f, "field_mass");
  double s = 0.0;
  for (const Complex& z : f.v) s += std::norm(z);
  const double measure =
      f.repr == Repr::Physical ? f.grid->dx : 2.0 * kPi * f.grid->dxi;
  return measure * s;
}

void free_flow(WaveguideField& f, double dt) {
  require_fourier(f, "free_flow");
  const WaveguideGrid& g = *f.grid;
  const std::size_t nx = std::size_t(g.nx);
  for (std::size_t i = 0; i < g.ball->size(); ++i) {
    std::span<Complex> line = f.line(i);
    const double lam = g.lambda[i];
    for (std::size_t k = 0; k < nx; ++k)
      line[k] *= phase(-dt * (g.xi[k] * g.xi[k] + lam));
  }
}

WaveguideField extract_profile(const WaveguideField& U, double t) {
  require_fourier(U, "extract_profile");
  WaveguideField F = U;
  free_flow(F, -t);
  return F;
}

namespace {

// Collocation product over the padded transverse box at one x column.
// Gathers each input column, inverts to physical y, forms u conj(v) w, and
// scatters the truncated modes back. `cols` points at the three columns
// (stride nx); `out` receives mode-major results at the same stride.
void column_triple_product(FieldFft& e, const Complex* fu, const Complex* fv,
                           const Complex* fw, Complex* out, std::size_t stride) {
  const std::size_t cells = e.cells();
  const std::size_t m = std::size_t(e.modes);
  if (e.scratch.size() < 2 * cells) e.scratch.resize(2 * cells);
  Complex* pu = e.scratch.data();
  Complex* pv = e.scratch.data() + cells;
  Complex* box = e.box.data();

  std::fill(box, box + cells, Complex(0.0));
  for (std::size_t i = 0; i < m; ++i) box[e.box_index[i]] = fu[i * stride];
  e.box.backward();
  std::copy(box, box + cells, pu);

  std::fill(box, box + cells, Complex(0.0));
  for (std::size_t i = 0; i < m; ++i) box[e.box_index[i]] = fv[i * stride];
  e.box.backward();
  std::copy(box, box + cells, pv);

  std::fill(box, box + cells, Complex(0.0));
  for (std::size_t i = 0; i < m; ++i) box[e.box_index[i]] = fw[i * stride];
  e.box.backward();

  for (std::size_t c = 0; c < cells; ++c) box[c] *= pu[c] * std::conj(pv[c]);
  e.box.forward();
  const double scale = 1.0 / double(cells);
  for (std::size_t i = 0; i < m; ++i) out[i * stride] = scale * box[e.box_index[i]];
}

}  // namespace

WaveguideTrajectory evolve_nls(const WaveguideField& U0, double t1, double h,
                               const EvolveOptions& opts, const FieldSampleFn& on_sample) {
  require_fourier(U0, "evolve_nls");
  const double t0 = U0.time;
  if (!(t1 > t0) || !(h > 0.0))
    throw std::invalid_argument("evolve_nls: need t0 < t1 and h > 0");
  if (opts.sample_stride < 1)
    throw std::invalid_argument("evolve_nls: sample stride must be >= 1");
  if (!(opts.blowup_guard > 0.0))
    throw std::invalid_argument("evolve_nls: blow-up guard must be positive");

  const WaveguideGrid& g = *U0.grid;
  FieldFft& e = *g.fft;
  const std::size_t nx = std::size_t(g.nx), m = g.ball->size();
  const std::size_t cells = e.cells();
  const long long steps_ll = std::llround((t1 - t0) / h);
  const std::size_t steps = std::size_t(std::max<long long>(1, steps_ll));
  const double hs = (t1 - t0) / double(steps);

  WaveguideField cur = U0;
  WaveguideTrajectory traj;
  traj.times.push_back(t0);
  if (opts.keep_fields) traj.samples.push_back(cur);
  if (on_sample) on_sample(cur);

  // Linear half-step multipliers are the same every step.
  std::vector<Complex> half(m * nx);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < nx; ++k)
      half[i * nx + k] = phase(-0.5 * hs * (g.xi[k] * g.xi[k] + g.lambda[i]));

  const int kcut = g.nx / 3;  // 2/3 rule: keep |signed k| <= nx/3

  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t q = 0; q < m * nx; ++q) cur.v[q] *= half[q];

    lines_to_physical(g, cur.v);

    double sup = 0.0;
    Complex* box = e.box.data();
    const double scale = 1.0 / double(cells);
    for (std::size_t j = 0; j < nx; ++j) {
      std::fill(box, box + cells, Complex(0.0));
      for (std::size_t i = 0; i < m; ++i) box[e.box_index[i]] = cur.v[i * nx + j];
      e.box.backward();
      for (std::size_t c = 0; c < cells; ++c) {
        const double a2 = std::norm(box[c]);
        sup = std::max(sup, a2);
        box[c] *= phase(-hs * a2);
      }
      e.box.forward();
      for (std::size_t i = 0; i < m; ++i)
        cur.v[i * nx + j] = scale * box[e.box_index[i]];
    }
    if (!(sup <= opts.blowup_guard * opts.blowup_guard))
      throw std::runtime_error("evolve_nls: blow-up guard tripped at t = " +
                               fmt_g17(t0 + double(step) * hs));

    lines_to_fourier(g, cur.v);

    if (opts.dealias) {
      for (std::size_t i = 0; i < m; ++i) {
        std::span<Complex> line = cur.line(i);
        for (int k = 0; k < g.nx; ++k) {
          const int sk = k <= g.nx / 2 ? k : k - g.nx;
          if (std::abs(sk) > kcut) line[std::size_t(k)] = Complex(0.0);
        }
      }
    }

    for (std::size_t q = 0; q < m * nx; ++q) cur.v[q] *= half[q];

    cur.time = t0 + double(step + 1) * hs;
    if ((step + 1) % std::size_t(opts.sample_stride) == 0 || step + 1 == steps) {
      traj.times.push_back(cur.time);
      if (opts.keep_fields) traj.samples.push_back(cur);
      if (on_sample) on_sample(cur);
    }
  }
  return traj;
}

WaveguideField trilinear_kernel(const WaveguideField& F, const WaveguideField& G,
                                const WaveguideField& H, double t) {
  require_fourier(F, "trilinear_kernel");
  require_fourier(G, "trilinear_kernel");
  require_fourier(H, "trilinear_kernel");
  require_same_grid(F, G, "trilinear_kernel");
  require_same_grid(F, H, "trilinear_kernel");

  const WaveguideGrid& g = *F.grid;
  FieldFft& e = *g.fft;
  const std::size_t nx = std::size_t(g.nx), m = g.ball->size();

  // Forward free flows, then x to physical.
  std::vector<Complex> u = F.v, vv = G.v, w = H.v;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < nx; ++k) {
      const Complex ph = phase(-t * (g.xi[k] * g.xi[k] + g.lambda[i]));
      u[i * nx + k] *= ph;
      vv[i * nx + k] *= ph;
      w[i * nx + k] *= ph;
    }
  lines_to_physical(g, u);
  lines_to_physical(g, vv);
  lines_to_physical(g, w);

  WaveguideField out = make_field(F.grid, Repr::Fourier, t);
  for (std::size_t j = 0; j < nx; ++j)
    column_triple_product(e, u.data() + j, vv.data() + j, w.data() + j,
                          out.v.data() + j, nx);

  lines_to_fourier(g, out.v);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < nx; ++k)
      out.v[i * nx + k] *= phase(t * (g.xi[k] * g.xi[k] + g.lambda[i]));
  return out;
}

WaveguideField space_resonant_part(const WaveguideField& F, const WaveguideField& G,
                                   const WaveguideField& H, double t) {
  require_fourier(F, "space_resonant_part");
  require_fourier(G, "space_resonant_part");
  require_fourier(H, "space_resonant_part");
  require_same_grid(F, G, "space_resonant_part");
  require_same_grid(F, H, "space_resonant_part");
  if (t < 1.0)
    throw std::invalid_argument("space_resonant_part: defined for t >= 1 only");

  const WaveguideGrid& g = *F.grid;
  FieldFft& e = *g.fft;
  const std::size_t nx = std::size_t(g.nx), m = g.ball->size();

  // Rotate by e^{-it lambda^2} so the phase-weighted mode sum becomes a plain
  // cubic convolution, slice by slice in xi.
  std::vector<Complex> rot(m);
  for (std::size_t i = 0; i < m; ++i) rot[i] = phase(-t * g.lambda[i]);

  std::vector<Complex> cu(m), cv(m), cw(m), co(m);
  WaveguideField out = make_field(F.grid, Repr::Fourier, t);
  const double pit = kPi / t;
  for (std::size_t k = 0; k < nx; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      cu[i] = rot[i] * F.v[i * nx + k];
      cv[i] = rot[i] * G.v[i * nx + k];
      cw[i] = rot[i] * H.v[i * nx + k];
    }
    column_triple_product(e, cu.data(), cv.data(), cw.data(), co.data(), 1);
    for (std::size_t i = 0; i < m; ++i)
      out.v[i * nx + k] = pit * std::conj(rot[i]) * co[i];
  }
  return out;
}

WaveguideField nonresonant_part(const WaveguideField& F, const WaveguideField& G,
                                const WaveguideField& H, double t) {
  WaveguideField res = space_resonant_part(F, G, H, t);
  WaveguideField tot = trilinear_kernel(F, G, H, t);
  for (std::size_t q = 0; q < tot.v.size(); ++q) tot.v[q] -= res.v[q];
  return tot;
}

namespace {

std::vector<std::int32_t> slice_support(const WaveguideField& f, std::size_t k,
                                        std::size_t nx, std::size_t m) {
  std::vector<std::int32_t> s;
  for (std::size_t i = 0; i < m; ++i)
    if (f.v[i * nx + k] != Complex(0.0)) s.push_back(std::int32_t(i));
  return s;
}

bool triple_listed(const std::vector<QuasiTriple>& list, std::int32_t i1,
                   std::int32_t i2, std::int32_t i3) {
  auto it = std::lower_bound(list.begin(), list.end(), std::array<std::int32_t, 3>{i1, i2, i3},
                             [](const QuasiTriple& a, const std::array<std::int32_t, 3>& b) {
                               if (a.i1 != b[0]) return a.i1 < b[0];
                               if (a.i2 != b[1]) return a.i2 < b[1];
                               return a.i3 < b[2];
                             });
  return it != list.end() && it->i1 == i1 && it->i2 == i2 && it->i3 == i3;
}

}  // namespace

WaveguideField normal_form_kernel(const WaveguideField& F, const WaveguideField& G,
                                  const WaveguideField& H, double t,
                                  const ClusterPartition& part,
                                  const QuasiResonantIndex& idx, double omega_tol) {
  require_fourier(F, "normal_form_kernel");
  require_fourier(G, "normal_form_kernel");
  require_fourier(H, "normal_form_kernel");
  require_same_grid(F, G, "normal_form_kernel");
  require_same_grid(F, H, "normal_form_kernel");
  if (t < 1.0)
    throw std::invalid_argument("normal_form_kernel: defined for t >= 1 only");
  if (!(omega_tol >= 0.0))
    throw std::invalid_argument("normal_form_kernel: tolerance must be >= 0");

  const WaveguideGrid& g = *F.grid;
  const ModeBall& ball = *g.ball;
  const std::size_t nx = std::size_t(g.nx), m = ball.size();
  if (idx.state_ball->size() != m || idx.state_ball->radius() != ball.radius() ||
      part.radius() != ball.radius())
    throw std::invalid_argument("normal_form_kernel: index/partition do not match the grid");

  WaveguideField out = make_field(F.grid, Repr::Fourier, t);
  for (std::size_t k = 0; k < nx; ++k) {
    const std::vector<std::int32_t> sf = slice_support(F, k, nx, m);
    const std::vector<std::int32_t> sg = slice_support(G, k, nx, m);
    const std::vector<std::int32_t> sh = slice_support(H, k, nx, m);
    if (sf.empty() || sg.empty() || sh.empty()) continue;

    for (std::int32_t i1 : sf) {
      const Complex a1 = F.v[std::size_t(i1) * nx + k];
      for (std::int32_t i2 : sg) {
        const Complex a12 = a1 * std::conj(G.v[std::size_t(i2) * nx + k]);
        const Mode base = sub(ball.mode(std::size_t(i1)), ball.mode(std::size_t(i2)));
        for (std::int32_t i3 : sh) {
          const Mode n = add(base, ball.mode(std::size_t(i3)));
          const int in = ball.index(n);
          if (in < 0) continue;
          const double om = g.lambda[std::size_t(i1)] - g.lambda[std::size_t(i2)] +
                            g.lambda[std::size_t(i3)] - g.lambda[std::size_t(in)];
          if (std::fabs(om) <= omega_tol) continue;
          if (idx.high(std::size_t(in)) &&
              (triple_listed(idx.lambda1[std::size_t(in)], i1, i2, i3) ||
               triple_listed(idx.lambda3[std::size_t(in)], i1, i2, i3)))
            continue;
          out.v[std::size_t(in) * nx + k] +=
              (phase(-t * om) / om) * a12 * H.v[std::size_t(i3) * nx + k];
        }
      }
    }
  }
  return out;
}

namespace {

// Circular center of mass of the per-x h^s density; 0 for the zero field.
double circular_center(const WaveguideGrid& g, std::span<const double> density) {
  Complex s(0.0);
  for (std::size_t j = 0; j < density.size(); ++j)
    s += density[j] * phase(kPi * g.x[j] / g.L);
  if (std::abs(s) == 0.0) return 0.0;
  return g.L / kPi * std::atan2(s.imag(), s.real());
}

double wrap_offset(double w, double L) {
  while (w >= L) w -= 2.0 * L;
  while (w < -L) w += 2.0 * L;
  return w;
}

}  // namespace

NormReport field_norms(const WaveguideField& F, const ClusterPartition& part,
                       double s, double sigma, double delta,
                       const WaveguideField* dt_rhs) {
  check_field(F, "field_norms");
  const WaveguideGrid& g = *F.grid;
  const ModeBall& ball = *g.ball;
  if (!(s > 0.5 * double(ball.dim())))
    throw std::invalid_argument("field_norms: need s > d/2");
  if (part.radius() != ball.radius() || part.matrix().dim() != ball.dim())
    throw std::invalid_argument("field_norms: partition does not match the grid");

  const std::size_t nx = std::size_t(g.nx), m = ball.size();

  WaveguideField four = F;
  to_fourier(four);
  WaveguideField phys = four;
  to_physical(phys);

  NormReport rep;
  rep.t = F.time;

  // Per-column transverse h^s values in both representations.
  std::vector<Complex> col(m);
  std::vector<double> hs_x(nx), hs_xi(nx);
  for (std::size_t j = 0; j < nx; ++j) {
    for (std::size_t i = 0; i < m; ++i) col[i] = phys.v[i * nx + j];
    hs_x[j] = cluster_norm_hs(part, ball, col, s);
  }
  for (std::size_t k = 0; k < nx; ++k) {
    for (std::size_t i = 0; i < m; ++i) col[i] = four.v[i * nx + k];
    hs_xi[k] = cluster_norm_hs(part, ball, col, s);
  }

  for (double v : hs_x) rep.hs_linf = std::max(rep.hs_linf, v);
  for (double v : hs_xi) rep.z = std::max(rep.z, v);

  // H^s of a Fourier-side multiplier family: mult(k) scales the whole column.
  const double pmeas = 2.0 * kPi * g.dxi;
  auto hs_of_multiplier = [&](auto&& mult) {
    double l2hs = 0.0, hsx = 0.0;
    for (std::size_t k = 0; k < nx; ++k) {
      const double w = mult(k);
      const double colsq = hs_xi[k] * hs_xi[k] * w * w;
      l2hs += colsq;
      double l2col = 0.0;
      for (std::size_t i = 0; i < m; ++i) l2col += std::norm(four.v[i * nx + k]);
      const double xi2 = g.xi[k] * g.xi[k];
      hsx += std::pow(1.0 + xi2, s) * l2col * w * w;
    }
    return std::sqrt(pmeas * (l2hs + hsx));
  };

  rep.hs = hs_of_multiplier([](std::size_t) { return 1.0; });
  const double s_smooth = hs_of_multiplier([&](std::size_t k) {
    return std::pow(1.0 + g.xi[k] * g.xi[k], 0.5 * sigma);
  });

  // x-weight around the circular center of mass, physical side.
  const double center = circular_center(g, hs_x);
  double wsum = 0.0;
  for (std::size_t j = 0; j < nx; ++j) {
    const double w = wrap_offset(g.x[j] - center, g.L);
    wsum += w * w * hs_x[j] * hs_x[j];
  }
  rep.weighted = std::sqrt(g.dx * wsum);

  rep.strong = s_smooth + rep.weighted;
  rep.xt_z = rep.z;
  if (rep.t >= 1.0) {
    rep.xt_s = std::pow(rep.t, -delta) * rep.strong;
    if (dt_rhs) {
      NormReport dt = field_norms(*dt_rhs, part, s, sigma, delta, nullptr);
      rep.xt_dt = std::pow(rep.t, 1.0 - delta) * dt.strong;
    }
  }
  rep.z_over_s = rep.strong > 0.0 ? rep.z / rep.strong : 0.0;
  rep.z_le_s = rep.z <= kZOverS * rep.strong;
  return rep;
}

void save_field_norms_csv(std::span<const NormReport> reports, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# diowave-field-norms,v1\n";
  f << "t,hs_linf,hs,strong,z,xt_z,xt_s,xt_dt\n";
  for (const NormReport& r : reports)
    f << fmt_g17(r.t) << ',' << fmt_g17(r.hs_linf) << ',' << fmt_g17(r.hs) << ','
      << fmt_g17(r.strong) << ',' << fmt_g17(r.z) << ',' << fmt_g17(r.xt_z) << ','
      << fmt_g17(r.xt_s) << ',' << fmt_g17(r.xt_dt) << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

constexpr char kFieldMagic[8] = {'D', 'W', 'F', 'L', 'D', '0', '0', '1'};

template <class T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_field(const WaveguideField& f, const std::string& path) {
  check_field(f, "save_field");
  std::ofstream o(path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot write " + path);
  o.write(kFieldMagic, sizeof(kFieldMagic));
  const WaveguideGrid& g = *f.grid;
  put(o, g.L);
  put(o, std::int32_t(g.nx));
  put(o, std::int32_t(g.ball->radius()));
  put(o, std::int32_t(g.A.dim()));
  for (int r = 0; r < g.A.dim(); ++r)
    for (int c = 0; c < g.A.dim(); ++c) put(o, g.A.entry(r, c));
  put(o, f.time);
  put(o, std::int32_t(f.repr == Repr::Fourier ? 1 : 0));
  o.write(reinterpret_cast<const char*>(f.v.data()),
          std::streamsize(f.v.size() * sizeof(Complex)));
  if (!o) throw std::runtime_error("write failed: " + path);
}

WaveguideField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_field: not a field snapshot: " + path);
  double L = 0, time = 0;
  std::int32_t nx = 0, radius = 0, dim = 0, repr = 0;
  get(in, L);
  get(in, nx);
  get(in, radius);
  get(in, dim);
  if (!in || dim < 1 || dim > 8) throw std::runtime_error("load_field: corrupt header");
  std::vector<double> entries(std::size_t(dim) * std::size_t(dim));
  for (double& e : entries) get(in, e);
  get(in, time);
  get(in, repr);
  if (!in) throw std::runtime_error("load_field: corrupt header");

  const DispersionMatrix A(dim, entries);
  WaveguideField f = make_field(make_waveguide_grid(A, L, nx, radius),
                                repr ? Repr::Fourier : Repr::Physical, time);
  in.read(reinterpret_cast<char*>(f.v.data()),
          std::streamsize(f.v.size() * sizeof(Complex)));
  if (!in || in.gcount() != std::streamsize(f.v.size() * sizeof(Complex)))
    throw std::runtime_error("load_field: truncated payload");
  return f;
}

namespace {

// f_hat(zeta_j) for zeta_j = x_j / (2t) through a Bluestein chirp transform:
// the quadratic phase splits as jm = (j^2 + m^2 - (j-m)^2)/2, turning the
// off-grid sums into one linear convolution evaluated by padded FFTs.
std::vector<Complex> chirp_transform_half_xj(std::span<const Complex> f, double L,
                                             double t) {
  const std::size_t n = f.size();
  const double dx = 2.0 * L / double(n);
  const double alpha = dx * dx / (2.0 * t);
  const double beta = L * dx / (2.0 * t);
  const double c0 = L * L / (2.0 * t);

  const int pad = fft_friendly_size(int(2 * n));
  SmallFft fft(1, {pad});
  std::vector<Complex> a(std::size_t(pad), Complex(0.0));
  std::vector<Complex> b(std::size_t(pad), Complex(0.0));
  for (std::size_t mm = 0; mm < n; ++mm) {
    const double m2 = double(mm) * double(mm);
    a[mm] = f[mm] * phase(beta * double(mm) - 0.5 * alpha * m2);
  }
  for (std::size_t kk = 0; kk < n; ++kk) {
    const Complex ch = phase(0.5 * alpha * double(kk) * double(kk));
    b[kk] = ch;
    if (kk > 0) b[std::size_t(pad) - kk] = ch;
  }

  Complex* buf = fft.data();
  std::copy(a.begin(), a.end(), buf);
  fft.forward();
  std::vector<Complex> fa(buf, buf + pad);
  std::copy(b.begin(), b.end(), buf);
  fft.forward();
  for (int q = 0; q < pad; ++q) buf[q] *= fa[std::size_t(q)];
  fft.backward();

  const double scale = dx / (2.0 * kPi) / double(pad);
  std::vector<Complex> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double j2 = double(j) * double(j);
    out[j] = scale * phase(-c0 + beta * double(j) - 0.5 * alpha * j2) * buf[j];
  }
  return out;
}

}  // namespace

DispersiveReport dispersive_check(std::span<const Complex> f, double L, double t) {
  const std::size_t n = f.size();
  if (n < 8) throw std::invalid_argument("dispersive_check: need at least 8 samples");
  if (!(L > 0.0)) throw std::invalid_argument("dispersive_check: L must be positive");
  if (!(t >= 1.0)) throw std::invalid_argument("dispersive_check: defined for t >= 1");

  double amax = 0.0;
  for (const Complex& z : f) amax = std::max(amax, std::abs(z));
  if (amax == 0.0) return DispersiveReport{0.0, 0.0};
  double edge = 0.0;
  for (std::size_t j = 0; j < 4; ++j)
    edge = std::max({edge, std::abs(f[j]), std::abs(f[n - 1 - j])});
  if (edge > 1e-10 * amax)
    throw std::invalid_argument("dispersive_check: window too small for the data");

  const double dx = 2.0 * L / double(n);

  // Exact periodic evolution, spectral in x. The top of the spectrum must be
  // empty too: beyond the Nyquist frequency the sampled transform aliases
  // instead of decaying, so under-resolved data would corrupt both sides.
  SmallFft fft(1, {int(n)});
  Complex* buf = fft.data();
  std::copy(f.begin(), f.end(), buf);
  fft.forward();
  double smax = 0.0, stail = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::abs(buf[k]);
    smax = std::max(smax, a);
    const double sk = k <= n / 2 ? double(k) : double(k) - double(n);
    if (std::fabs(sk) >= 0.45 * double(n)) stail = std::max(stail, a);
  }
  if (stail > 1e-10 * smax)
    throw std::invalid_argument("dispersive_check: grid too coarse for the data");
  for (std::size_t k = 0; k < n; ++k) {
    const double sk = k <= n / 2 ? double(k) : double(k) - double(n);
    const double xi = kPi * sk / L;
    buf[k] *= phase(-t * xi * xi) / double(n);
  }
  fft.backward();
  std::vector<Complex> exact(buf, buf + n);

  // Stationary-phase approximation at the same grid points. Past the Nyquist
  // frequency the true transform is below the tail threshold, so the envelope
  // is taken as zero there rather than trusting the aliased chirp values.
  const std::vector<Complex> fhat = chirp_transform_half_xj(f, L, t);
  const double amp = std::sqrt(kPi / t);
  const double zeta_max = kPi / dx;
  double sup = 0.0, xnorm2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = -L + double(j) * dx;
    const Complex envelope =
        std::fabs(x / (2.0 * t)) <= zeta_max ? fhat[j] : Complex(0.0);
    const Complex approx =
        amp * phase(x * x / (4.0 * t) - 0.25 * kPi) * envelope;
    sup = std::max(sup, std::abs(exact[j] - approx));
    xnorm2 += x * x * std::norm(f[j]);
  }
  const double xnorm = std::sqrt(dx * xnorm2);
  DispersiveReport rep;
  rep.sup_error = sup;
  rep.normalized = xnorm > 0.0 ? sup * std::pow(t, 0.75) / xnorm : 0.0;
  return rep;
}

}  // namespace diowave
