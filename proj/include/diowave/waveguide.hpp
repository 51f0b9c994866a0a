#pragma once
// Truncated waveguide PDE side: split-step solver for the cubic defocusing
// equation on [-L, L) x T^d, profile extraction, the trilinear interaction
// kernel with its space-resonant / non-resonant split, the normal-form
// kernel, the stationary-phase dispersive check, and field norms.
//
// Continuum conventions: f_hat(xi) = (2 pi)^{-1} integral f e^{-i xi x} dx,
// inverse without prefactor. Discretely, x_j = -L + j dx with dx = 2L/Nx and
// xi_k = pi k / L; the stored Fourier representation holds true f_hat(xi_k)
// values (the (-1)^k fold and dx/(2 pi) scale are baked into the transform
// pair, which round-trips exactly up to FFT round-off). Transverse norms are
// plain mode sums; the torus volume (2 pi)^d is a constant absorbed into
// amplitude choices everywhere.

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diowave/clusters.hpp"
#include "diowave/effective.hpp"
#include "diowave/lattice.hpp"
#include "diowave/resonance.hpp"

namespace diowave {

struct FieldFft;  // transform engine (plans + scratch), owned by the grid

// x-axis representation; the transverse axis is always mode coefficients.
enum class Repr { Physical, Fourier };

struct WaveguideGrid {
  explicit WaveguideGrid(const DispersionMatrix& m) : A(m) {}

  DispersionMatrix A;
  double L = 0.0;
  int nx = 0;
  double dx = 0.0, dxi = 0.0;
  std::shared_ptr<const ModeBall> ball;
  std::vector<double> x;   // x_j = -L + j dx
  std::vector<double> xi;  // FFT-ordered: pi k / L, negative half after nx/2
  std::vector<double> lambda;  // eigenvalue_sq per ball mode
  std::shared_ptr<FieldFft> fft;  // single-threaded plan + buffer reuse
};

// Throws unless L > 0 and nx is a power of two >= 4.
std::shared_ptr<const WaveguideGrid> make_waveguide_grid(const DispersionMatrix& A,
                                                         double L, int nx, int radius);

// values[i * nx + j]: transverse mode i (grid->ball order), x or xi index j.
struct WaveguideField {
  std::shared_ptr<const WaveguideGrid> grid;
  Repr repr = Repr::Fourier;
  double time = 0.0;
  std::vector<Complex> v;

  std::span<Complex> line(std::size_t mode) {
    return std::span<Complex>(v).subspan(mode * std::size_t(grid->nx),
                                         std::size_t(grid->nx));
  }
  std::span<const Complex> line(std::size_t mode) const {
    return std::span<const Complex>(v).subspan(mode * std::size_t(grid->nx),
                                               std::size_t(grid->nx));
  }
};

WaveguideField make_field(std::shared_ptr<const WaveguideGrid> grid,
                          Repr repr = Repr::Fourier, double time = 0.0);

// Exact inverse pair (up to FFT round-off); no-ops when already there.
void to_fourier(WaveguideField& f);
void to_physical(WaveguideField& f);

// integral |U|^2 dx (sum over modes); representation-independent by Plancherel.
double field_mass(const WaveguideField& f);

// Free Schroedinger group e^{i dt Laplacian}: Fourier multiplier
// e^{-i dt (xi^2 + lambda_n^2)}. Requires Fourier representation.
void free_flow(WaveguideField& f, double dt);

// Profile pull-back F = e^{-it Laplacian} U, i.e. F_hat = e^{+it(xi^2+lambda^2)} U_hat.
// Requires Fourier representation; keeps the field's timestamp.
WaveguideField extract_profile(const WaveguideField& U, double t);

struct EvolveOptions {
  int sample_stride = 10;
  bool dealias = false;        // 2/3-rule mask on x-frequencies per step
  double blowup_guard = 1e6;   // sup|U| above this aborts
  bool keep_fields = true;     // store sampled fields in the trajectory
};

struct WaveguideTrajectory {
  std::vector<double> times;
  std::vector<WaveguideField> samples;  // Fourier representation
};

using FieldSampleFn = std::function<void(const WaveguideField&)>;

// Strang split-step from U0.time to t1: exact linear half-steps in Fourier,
// exact pointwise nonlinear step U <- U e^{-i h |U|^2} on the collocation
// grid (defocusing cubic). The linear substep and the pointwise rotation
// conserve the discrete mass exactly; the transverse re-truncation after the
// nonlinear step is the spectral projection and sheds the out-of-ball cubic
// content (relative mass loss of order h^2 eps^4 per step when interactions
// leave the ball). Second order in h; the same data see a projection defect
// of size h^2 eps^5 per step in the field. Throws
// std::invalid_argument on bad arguments, std::runtime_error when the
// blow-up guard trips.
WaveguideTrajectory evolve_nls(const WaveguideField& U0, double t1, double h,
                               const EvolveOptions& opts = {},
                               const FieldSampleFn& on_sample = {});

// N^t[F,G,H] = e^{-it Lap}( e^{it Lap}F conj(e^{it Lap}G) e^{it Lap}H ):
// three forward free flows, pointwise product on the physical collocation
// grid, one backward free flow. Inputs in Fourier representation on one grid.
WaveguideField trilinear_kernel(const WaveguideField& F, const WaveguideField& G,
                                const WaveguideField& H, double t);

// Stationary-phase principal term, pointwise in xi:
//   out_hat(xi, n) = (pi/t) sum_{n1-n2+n3=n} e^{-it Omega} F1_hat conj(G2_hat) H3_hat,
// via the rotation u = e^{-it lambda^2} g_hat and a padded transverse box.
// Requires t >= 1.
WaveguideField space_resonant_part(const WaveguideField& F, const WaveguideField& G,
                                   const WaveguideField& H, double t);

// trilinear_kernel minus space_resonant_part; additive by construction.
WaveguideField nonresonant_part(const WaveguideField& F, const WaveguideField& G,
                                const WaveguideField& H, double t);

// Normal-form boundary term, pointwise in xi:
//   out_hat(xi, n) = sum (e^{-it Omega} / Omega) F1_hat conj(G2_hat) H3_hat
// over zero-momentum triples with |Omega| > omega_tol, excluding the
// quasi-resonant branches on high-frequency n (low n sums all non-resonant
// triples). Cost scales with the product of the inputs' transverse supports.
// Requires t >= 1 and an index built on the grid's ball.
WaveguideField normal_form_kernel(const WaveguideField& F, const WaveguideField& G,
                                  const WaveguideField& H, double t,
                                  const ClusterPartition& part,
                                  const QuasiResonantIndex& idx, double omega_tol);

// Z <= kZOverS * S: the profile norm chain bounds the sup-in-xi cluster norm
// by the strong norm with constant one; frozen from a randomized sweep.
inline constexpr double kZOverS = 1.0;

struct NormReport {
  double t = 0.0;
  double hs_linf = 0.0;   // sup_x of the transverse cluster h^s norm
  double hs = 0.0;        // H^s: rss of L2_x h^s_y and H^s_x l2_y
  double strong = 0.0;    // S = ||<dx>^sigma F||_{H^s} + ||x F||_{L2 h^s}
  double z = 0.0;         // sup_xi of the transverse cluster h^s norm
  double weighted = 0.0;  // ||x F||_{L2 h^s}, x centered at the circular mean
  double xt_z = 0.0, xt_s = 0.0, xt_dt = 0.0;  // X_T contributions (t >= 1)
  double z_over_s = 0.0;
  bool z_le_s = true;     // z <= kZOverS * strong
};

// dt_rhs, when given, is the equation right-hand side N^t[F,F,F] whose S-norm
// feeds the xt_dt entry (i d/dt F = N^t, so ||d/dt F||_S = ||N^t||_S).
// The x-weight wraps around the field's circular center of mass. s > d/2.
NormReport field_norms(const WaveguideField& F, const ClusterPartition& part,
                       double s, double sigma, double delta,
                       const WaveguideField* dt_rhs = nullptr);

// CSV schema: t,hs_linf,hs,strong,z,xt_z,xt_s,xt_dt.
void save_field_norms_csv(std::span<const NormReport> reports, const std::string& path);

// Binary field snapshot, native endianness: "DWFLD001" header with the grid
// shape and matrix, then the raw complex array. Round-trips bit-exactly.
void save_field(const WaveguideField& f, const std::string& path);
WaveguideField load_field(const std::string& path);

struct DispersiveReport {
  double sup_error = 0.0;   // sup_x |e^{it dxx} f - stationary-phase approx|
  double normalized = 0.0;  // sup_error * t^{3/4} / ||x f||_{L2}
};

// f sampled on x_j = -L + j dx, dx = 2L/N. Exact evolution is spectral and
// periodic; the approximation is e^{ix^2/4t} f_hat(x/2t) / (2 sqrt(i t))
// evaluated off-grid by a Bluestein chirp transform. Throws when t < 1 or the
// window tails are not negligible (|f| at the edges above 1e-10 of its max).
DispersiveReport dispersive_check(std::span<const Complex> f, double L, double t);

}  // namespace diowave
