#pragma once
// Effective dynamics: the quasi-resonant toroidal system, the waveguide
// effective system (space-resonant plus quasi-resonant parts, pointwise in
// xi), fixed-step RK4 integration, and conservation diagnostics.

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diowave/clusters.hpp"
#include "diowave/fftw_util.hpp"
#include "diowave/lattice.hpp"
#include "diowave/resonance.hpp"

namespace diowave {

using Complex = std::complex<double>;

// Transverse amplitudes a_n over a mode ball at one time.
struct ToroidalState {
  std::shared_ptr<const ModeBall> ball;
  double time = 0.0;
  std::vector<Complex> a;
};

ToroidalState make_toroidal_state(std::shared_ptr<const ModeBall> ball, double time = 0.0);

// Profile amplitudes G_hat(xi_k, n), slice-major: g[k * ball->size() + i].
// The effective flow never couples distinct xi; its t >= 1 domain restriction
// is enforced by the flow operators, not by this container.
struct EffectiveWaveguideState {
  std::shared_ptr<const ModeBall> ball;
  std::vector<double> xi;
  double time = 1.0;
  std::vector<Complex> g;

  std::size_t slices() const { return xi.size(); }
  std::span<Complex> slice(std::size_t k) {
    return std::span<Complex>(g).subspan(k * ball->size(), ball->size());
  }
  std::span<const Complex> slice(std::size_t k) const {
    return std::span<const Complex>(g).subspan(k * ball->size(), ball->size());
  }
};

EffectiveWaveguideState make_effective_state(std::shared_ptr<const ModeBall> ball,
                                             std::vector<double> xi, double time = 1.0);

// Effective toroidal derivative: on high-frequency n,
//   d/dt a_n = -2i sum_{branch-1 triples} e^{-it Omega} a_{n1} conj(a_{n2}) a_{n3},
// zero elsewhere; the factor 2 absorbs the mirrored branch. Sizes must match
// the index's state ball.
void toroidal_rhs(const QuasiResonantIndex& idx, std::span<const Complex> a, double t,
                  std::span<Complex> out);

// Full interaction system on the ball:
//   d/dt a_n = -i sum_{n1 - n2 + n3 = n} e^{-it Omega} a_{n1} conj(a_{n2}) a_{n3},
// cubic reference loop over every stored triple.
void full_toroidal_rhs_naive(const DispersionMatrix& A, const ModeBall& ball,
                             std::span<const Complex> a, double t, std::span<Complex> out);

// Same derivative through a padded transverse FFT. The rotation
// u_n = e^{-it lambda_n^2} a_n turns the phase-weighted sum into a plain
// cubic, and the padding (>= 4R + 1 per axis) makes the wrap exact.
class FullToroidalRhs {
 public:
  FullToroidalRhs(const DispersionMatrix& A, std::shared_ptr<const ModeBall> ball);
  void operator()(std::span<const Complex> a, double t, std::span<Complex> out);

 private:
  std::shared_ptr<const ModeBall> ball_;
  std::vector<double> lambda_;
  std::vector<std::size_t> box_index_;
  SmallFft fft_;
};

// Waveguide effective derivative -i (R + Q) on every slice, where
//   R_n = (pi/t) (2 mass(slice) - |g_n|^2) g_n,
//   Q_n = (2 pi / t) sum_{branch-1 triples} e^{-it Omega} g_{n1} conj(g_{n2}) g_{n3}
// on high-frequency n and zero otherwise. Throws std::invalid_argument for
// t < 1 (the pi/t weights live on t >= 1) or on shape mismatch.
void effective_rhs(const QuasiResonantIndex& idx, const EffectiveWaveguideState& g, double t,
                   std::span<Complex> out);

// Same derivative on raw slice-major storage with `slices` slices.
void effective_rhs(const QuasiResonantIndex& idx, std::size_t slices,
                   std::span<const Complex> g, double t, std::span<Complex> out);

struct IntegrateOptions {
  // Relative per-slice mass drift that aborts the run (too-large step).
  double mass_guard = 1e-3;
  // Every k-th step is sampled; the initial and final states always are.
  int sample_stride = 10;
};

struct EffectiveTrajectory {
  std::vector<double> times;
  std::vector<EffectiveWaveguideState> samples;
};

// Classical fixed-step RK4 with phases evaluated exactly at stage times.
// Throws std::invalid_argument unless 1 <= t0 < t1 and h > 0;
// std::runtime_error when the mass guard trips.
EffectiveTrajectory integrate_effective(const EffectiveWaveguideState& g0,
                                        const QuasiResonantIndex& idx, double t0, double t1,
                                        double h, const IntegrateOptions& opts = {});

// Generic fixed-step RK4 over one complex vector; rhs(t, y, dy). Used for
// toroidal flows and negative controls. No mass guard.
using VectorRhs = std::function<void(double, std::span<const Complex>, std::span<Complex>)>;
std::vector<std::pair<double, std::vector<Complex>>> integrate_rk4(
    const VectorRhs& rhs, std::span<const Complex> y0, double t0, double t1, double h,
    int sample_stride = 10);

// Wraps toroidal snapshots as a single-slice trajectory so the conservation
// report applies unchanged; the lone xi value is a label only.
EffectiveTrajectory wrap_toroidal_trajectory(
    std::shared_ptr<const ModeBall> ball,
    const std::vector<std::pair<double, std::vector<Complex>>>& samples);

// Super-actions over high-frequency clusters (weight >= cutoff), cluster
// h^s traces (Z = sup over xi, Hs = l^2 over xi with the grid weight), and
// plain Sobolev per-slice sup. Drifts are relative to the first sample;
// super-action entries starting from zero mass are measured against the
// slice mass instead.
struct ConservationReport {
  double s = 0.0;
  double cutoff = 0.0;
  int alpha0 = -1;
  std::vector<int> tracked_clusters;
  std::vector<double> times;
  // Sample-major, entry layout: slice * tracked_clusters.size() + j.
  std::vector<std::vector<double>> super_actions;
  std::vector<double> z_trace, hs_trace, hs_slice_trace;
  double max_superaction_drift = 0.0;
  double max_z_drift = 0.0;
  double max_hs_drift = 0.0;
};

ConservationReport conservation_report(const ClusterPartition& p,
                                       const EffectiveTrajectory& traj, double s,
                                       double cutoff);

// CSV exports: per-sample super-actions (t, xi_index, cluster, super_action)
// and norm traces (t, z, hs, hs_max_slice).
void save_conservation_csv(const ConservationReport& rep, const std::string& path);
void save_norm_trace_csv(const ConservationReport& rep, const std::string& path);

}  // namespace diowave
