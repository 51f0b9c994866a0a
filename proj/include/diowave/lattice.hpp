#pragma once
// Transverse lattice primitives: dispersion matrices on Z^d (d = 2, 3),
// eigenvalue and resonance arithmetic, admissibility scans, ball enumeration.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace diowave {

inline constexpr int kMaxDim = 3;

// Lattice mode. Components beyond the active dimension stay zero, so norms
// and bilinear forms never need the dimension alongside the value.
using Mode = std::array<int, kMaxDim>;

inline Mode mode_of(int a, int b, int c = 0) { return Mode{a, b, c}; }

inline Mode add(Mode a, const Mode& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
  return a;
}

inline Mode sub(Mode a, const Mode& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
  return a;
}

inline Mode neg(Mode a) {
  for (int i = 0; i < kMaxDim; ++i) a[i] = -a[i];
  return a;
}

inline bool is_zero(const Mode& a) { return a[0] == 0 && a[1] == 0 && a[2] == 0; }

inline std::int64_t norm2(const Mode& a) {
  std::int64_t s = 0;
  for (int i = 0; i < kMaxDim; ++i) s += std::int64_t(a[i]) * a[i];
  return s;
}

double norm(const Mode& a);

// First nonzero component positive; the zero mode is not lex-positive.
bool lex_positive(const Mode& a);

// "a;b" or "a;b;c" depending on dim.
std::string mode_to_string(const Mode& a, int dim);

// Symmetric positive-definite dispersion matrix A. Eigenvalues of the torus
// Laplacian are lambda_n^2 = n^T A n; the coercivity constants are the extreme
// eigenvalues of A (closed forms for d <= 3).
class DispersionMatrix {
 public:
  // Entries row-major, dim x dim. Throws std::invalid_argument unless the
  // matrix is symmetric and positive-definite.
  DispersionMatrix(int dim, const std::vector<double>& entries);

  static DispersionMatrix identity(int dim);
  static DispersionMatrix diagonal(const std::vector<double>& d);
  // Irrational-entry fixture with entries rounded to 30 significand bits, so
  // quadratic forms on desk-scale modes are exact in doubles.
  static DispersionMatrix golden_fixture(int dim);

  int dim() const { return dim_; }
  double entry(int i, int j) const { return a_[i * dim_ + j]; }
  std::vector<double> entries() const;

  double form(const Mode& x, const Mode& y) const;  // x^T A y
  double eigenvalue_sq(const Mode& n) const { return form(n, n); }

  double coercivity_lower() const { return eig_lo_; }
  double coercivity_upper() const { return eig_hi_; }

  bool operator==(const DispersionMatrix& o) const;

 private:
  int dim_;
  std::array<double, kMaxDim * kMaxDim> a_{};
  double eig_lo_ = 0, eig_hi_ = 0;
};

// Interaction quadruple (n1, n2, n3, n). Momentum balance means n1-n2+n3 = n.
struct Quadruple {
  Mode n1, n2, n3, n;
};

inline Quadruple make_interaction(const Mode& n1, const Mode& n2, const Mode& n3) {
  return Quadruple{n1, n2, n3, add(sub(n1, n2), n3)};
}

inline bool zero_momentum(const Quadruple& q) {
  return add(sub(q.n1, q.n2), q.n3) == q.n;
}

// Pairing quadruples {n1, n3} = {n2, n} as multisets; under momentum balance
// this is n1 == n2 or n2 == n3.
inline bool is_pairing(const Quadruple& q) {
  return (q.n1 == q.n2 && q.n3 == q.n) || (q.n2 == q.n3 && q.n1 == q.n);
}

// Omega = lambda_{n1}^2 - lambda_{n2}^2 + lambda_{n3}^2 - lambda_n^2.
double resonant_value(const DispersionMatrix& A, const Quadruple& q);

// 2 * (n1-n2)^T A (n2-n3); equals resonant_value exactly under momentum
// balance. Throws std::invalid_argument when momentum is nonzero.
double factored_resonant_value(const DispersionMatrix& A, const Quadruple& q);

// Minimal regularity s0 = d/2 + 4*tau/c_d for the small-divisor ledger.
double regularity_threshold(double tau, double c_d, int dim);

// Euclidean ball |n| <= radius, modes sorted by (|n|^2, lex), with a dense
// box lookup table for O(1) index queries.
class ModeBall {
 public:
  ModeBall(int dim, int radius);

  int dim() const { return dim_; }
  int radius() const { return radius_; }
  std::size_t size() const { return modes_.size(); }
  const std::vector<Mode>& modes() const { return modes_; }
  const Mode& mode(std::size_t i) const { return modes_[i]; }

  // -1 when |m| > radius.
  int index(const Mode& m) const;
  bool contains(const Mode& m) const { return index(m) >= 0; }

 private:
  int dim_, radius_, side_;
  std::vector<Mode> modes_;
  std::vector<std::int32_t> lut_;
};

// Empirical admissibility scan: c_R = min |a^T A b| |a|^tau |b|^tau over
// nonzero integer pairs in the ball. c_R > 0 for all R is the quantitative
// non-resonance property; c_R = 0 at some R certifies failure with a witness.
struct AdmissibilityReport {
  double tau = 0;
  int radius = 0;
  double constant = 0;
  Mode witness_a{}, witness_b{};
  bool positive() const { return constant > 0; }
};

AdmissibilityReport scan_admissibility(const DispersionMatrix& A, double tau, int radius);

// Certified resonance tolerance from the scan at radius 2R: any nonzero
// |Omega| on ball(R) interactions is >= 2*c_{2R}/(2R)^{2 tau}. Returns
// min(cap, bound/2); 0 when the matrix is not admissible at 2R.
double certified_resonance_tolerance(const DispersionMatrix& A, double tau, int radius,
                                     double cap = 1e-9);

}  // namespace diowave
