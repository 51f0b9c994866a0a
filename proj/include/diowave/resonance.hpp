#pragma once
// Exact resonances, quasi-resonant interaction indices, small-divisor
// sampling, and normal-form kernel weights on the truncated lattice.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diowave/clusters.hpp"
#include "diowave/lattice.hpp"

namespace diowave {

// Census of zero-momentum quadruples with incoming modes in ball(R) and
// |Omega| <= tol. Counts are exact for the whole census; only the non-pairing
// members are stored (pairings are fully characterized by the two diagonal
// patterns), as an enumeration-order prefix of at most `cap` entries.
struct ResonantSet {
  int dim = 0;
  int radius = 0;
  double tol = 0.0;
  std::vector<Quadruple> non_pairing;
  std::size_t member_count = 0;
  std::size_t pairing_count = 0;
  std::size_t non_pairing_count = 0;
  bool truncated = false;
  // Every member is a pairing {n1, n3} = {n2, n}.
  bool trivial_only = false;
};

// Brute-force enumeration over ball(R)^3; the outgoing mode is determined by
// momentum balance and may leave the ball. Throws std::invalid_argument on
// radius < 1 or tol < 0.
ResonantSet enumerate_resonant_set(const DispersionMatrix& A, int radius, double tol,
                                   std::size_t cap = 1000000);

// Membership by predicate, independent of the stored prefix.
bool resonant_member(const DispersionMatrix& A, const ResonantSet& set, const Quadruple& q);

struct SumIdentityCheck {
  std::complex<double> lhs;
  double rhs = 0.0;
  double rel_error = 0.0;
};

// Sums a_{n1} conj(a_{n2}) a_{n3} conj(a_n) over every member of a trivial
// resonant set (term-by-term over both pairing families) and compares with
// the closed form 2 (sum |a|^2)^2 - sum |a|^4. The amplitude span is indexed
// by `ball`, which must match the set's dimension and radius. Throws
// std::logic_error on non-trivial or truncated-incompatible sets,
// std::invalid_argument on shape mismatches.
SumIdentityCheck resonant_sum_identity_check(const ResonantSet& set, const ModeBall& ball,
                                             std::span<const std::complex<double>> a);

// One quasi-resonant incoming triple; indices address the state ball, omega
// is the resonance value of the induced quadruple.
struct QuasiTriple {
  std::int32_t i1 = 0, i2 = 0, i3 = 0;
  double omega = 0.0;
};

// For each high-frequency outgoing n (cluster weight >= alpha0_const), the
// branch-1 triples keep the first incoming mode inside n's cluster and the
// other two below theta * K_alpha; branch 3 mirrors the roles of n1 and n3.
// Cluster membership is truncated to ball(R) so triples stay addressable on
// the state ball.
struct QuasiResonantIndex {
  std::shared_ptr<const ModeBall> state_ball;
  double theta = 0.0;
  double alpha0_const = 0.0;
  int alpha0 = -1;
  std::vector<std::uint8_t> is_high;
  std::vector<std::vector<QuasiTriple>> lambda1;
  std::vector<std::vector<QuasiTriple>> lambda3;
  std::size_t triple_count = 0;
  bool empty_warning = false;

  bool high(std::size_t ball_index) const { return is_high[ball_index] != 0; }
};

// Desk-scale default for the high-frequency weight cutoff.
inline double default_alpha0_constant(const ClusterPartition& p) {
  return std::max(2.0 * p.origin_bound(), 16.0);
}

// Squared low-mode cutoff (theta * K_alpha)^2. Boundary ties (integer |m|^2
// landing exactly on the cutoff) are resolved by this one evaluation order,
// shared by the index builder, the membership predicates, and the tests.
inline double low_cutoff_sq(double theta, double k_alpha) {
  const double b = theta * k_alpha;
  return b * b;
}

// Enumerates both branches independently (branch 1 by (n1, n2), branch 3 by
// (n3, n2)), so their mirror symmetry stays a checkable property. Throws
// std::invalid_argument unless theta is in (0, 1) and alpha0_const > 0.
QuasiResonantIndex build_quasi_resonant_index(const ClusterPartition& p, double theta,
                                              double alpha0_const);

// Membership predicates evaluated from the definitions, not the stored lists.
bool in_lambda1(const ClusterPartition& p, double theta, double alpha0_const,
                const Quadruple& q);
bool in_lambda3(const ClusterPartition& p, double theta, double alpha0_const,
                const Quadruple& q);

struct DivisorSample {
  Quadruple q;
  double omega = 0.0;
  double weight = 0.0;
  double ratio = 0.0;
};

// Ledger of the small-divisor bound ratio
//   (K_alpha^s / |Omega|) / ((n1*)^s (n2*)^{4 tau / c_d})
// over zero-momentum quadruples with high-frequency outgoing mode, nonzero
// Omega, and triple outside both quasi-resonant branches; (n1*, n2*) is the
// decreasing rearrangement of the three input magnitudes. Quadruples with
// two incoming modes at the origin are excluded: the ratio denominator
// degenerates there while coercivity keeps |Omega| comparable to K^2, so
// they carry no divisor loss.
//
// Two probes feed max_ratio. The deterministic core enumerates every
// quadruple whose two smallest inputs lie in ball(core_small_radius) while
// the remaining input and the outgoing mode sweep the whole truncation; the
// a2^{-4 tau / c_d} decay makes that region dominate the supremum, and the
// exhaustive max stays comparable across truncation radii. The seeded
// uniform sample covers the remainder and feeds the quantiles and rows.
struct DivisorLedger {
  int dim = 0;
  double s = 0.0, tau = 0.0, c_d = 0.0;
  double theta = 0.0, alpha0_const = 0.0;
  std::uint64_t seed = 0;
  std::size_t samples_requested = 0;
  std::size_t accepted = 0;
  std::size_t draws = 0;
  bool exhausted = false;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  double q50 = 0.0, q90 = 0.0, q99 = 0.0;
  DivisorSample argmax;
  std::vector<DivisorSample> rows;
  int core_small_radius = 0;
  // Ratio evaluations in the core sweep; branch membership is only resolved
  // for would-be maxima, so this counts pre-branch candidates.
  std::size_t core_candidates = 0;
  double core_max_ratio = 0.0;
  DivisorSample core_argmax;
};

DivisorLedger divisor_ledger(const ClusterPartition& p, const QuasiResonantIndex& idx,
                             double s, double tau, std::size_t samples, std::uint64_t seed,
                             std::size_t row_cap = 1000);

// Poincare-Dulac kernel weight 1 / Omega. Throws std::domain_error when
// |Omega| <= omega_tol or when the quadruple belongs to a quasi-resonant
// branch (those terms stay in the effective system).
double normal_form_weight(const ClusterPartition& p, const QuasiResonantIndex& idx,
                          const Quadruple& q, double omega_tol);

void save_resonant_set_csv(const DispersionMatrix& A, const ResonantSet& set,
                           const std::string& path);
void save_quasi_index_csv(const QuasiResonantIndex& idx, const std::string& path);
void save_divisor_ledger_csv(const DivisorLedger& led, const std::string& path);

}  // namespace diowave
