#include "diowave/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace diowave {

namespace {

// Round to 30 significand bits. Quadratic forms in entries k/2^30 against
// integer modes up to |n| ~ 2^8 stay below 2^47, hence exact in doubles.
double dyadic30(double x) { return std::ldexp(std::round(std::ldexp(x, 30)), -30); }

void eigen_range_2x2(const double* a, double& lo, double& hi) {
  double m = 0.5 * (a[0] + a[3]);
  double d = std::sqrt(0.25 * (a[0] - a[3]) * (a[0] - a[3]) + a[1] * a[1]);
  lo = m - d;
  hi = m + d;
}

// Trigonometric closed form for symmetric 3x3 eigenvalues.
void eigen_range_3x3(const double* a, double& lo, double& hi) {
  double a00 = a[0], a01 = a[1], a02 = a[2], a11 = a[4], a12 = a[5], a22 = a[8];
  double p1 = a01 * a01 + a02 * a02 + a12 * a12;
  if (p1 == 0.0) {
    lo = std::min({a00, a11, a22});
    hi = std::max({a00, a11, a22});
    return;
  }
  double q = (a00 + a11 + a22) / 3.0;
  double p2 = (a00 - q) * (a00 - q) + (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + 2.0 * p1;
  double p = std::sqrt(p2 / 6.0);
  double b00 = (a00 - q) / p, b01 = a01 / p, b02 = a02 / p;
  double b11 = (a11 - q) / p, b12 = a12 / p, b22 = (a22 - q) / p;
  double detb = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02) +
                b02 * (b01 * b12 - b11 * b02);
  double r = std::clamp(0.5 * detb, -1.0, 1.0);
  double phi = std::acos(r) / 3.0;
  double e_hi = q + 2.0 * p * std::cos(phi);
  double e_lo = q + 2.0 * p * std::cos(phi + 2.0 * 3.141592653589793238462643383279502884 / 3.0);
  lo = e_lo;
  hi = e_hi;
}

}  // namespace

double norm(const Mode& a) { return std::sqrt(double(norm2(a))); }

bool lex_positive(const Mode& a) {
  for (int i = 0; i < kMaxDim; ++i) {
    if (a[i] > 0) return true;
    if (a[i] < 0) return false;
  }
  return false;
}

std::string mode_to_string(const Mode& a, int dim) {
  std::string s;
  for (int i = 0; i < dim; ++i) {
    if (i) s += ';';
    s += std::to_string(a[i]);
  }
  return s;
}

DispersionMatrix::DispersionMatrix(int dim, const std::vector<double>& entries) : dim_(dim) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dispersion matrix: dim must be 2 or 3");
  if (entries.size() != std::size_t(dim) * dim)
    throw std::invalid_argument("dispersion matrix: wrong entry count");
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double v = entries[i * dim + j];
      if (!std::isfinite(v)) throw std::invalid_argument("dispersion matrix: non-finite entry");
      if (v != entries[j * dim + i])
        throw std::invalid_argument("dispersion matrix: not symmetric");
      a_[i * dim + j] = v;
    }
  if (dim == 2) {
    double m[4] = {a_[0], a_[1], a_[2], a_[3]};
    eigen_range_2x2(m, eig_lo_, eig_hi_);
  } else {
    eigen_range_3x3(a_.data(), eig_lo_, eig_hi_);
  }
  if (!(eig_lo_ > 0)) throw std::invalid_argument("dispersion matrix: not positive-definite");
}

DispersionMatrix DispersionMatrix::identity(int dim) {
  std::vector<double> e(std::size_t(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) e[i * dim + i] = 1.0;
  return DispersionMatrix(dim, e);
}

DispersionMatrix DispersionMatrix::diagonal(const std::vector<double>& d) {
  int dim = int(d.size());
  std::vector<double> e(std::size_t(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) e[i * dim + i] = d[i];
  return DispersionMatrix(dim, e);
}

DispersionMatrix DispersionMatrix::golden_fixture(int dim) {
  double g = dyadic30((std::sqrt(5.0) - 1.0) / 2.0);
  if (dim == 2) return DispersionMatrix(2, {1.0, g, g, 2.0});
  double r2 = dyadic30(std::sqrt(2.0) - 1.0);
  double r3 = dyadic30(std::sqrt(3.0) - 1.0);
  return DispersionMatrix(3, {1.0, g, r2, g, 2.0, r3, r2, r3, 3.0});
}

std::vector<double> DispersionMatrix::entries() const {
  std::vector<double> e(std::size_t(dim_) * dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) e[i * dim_ + j] = a_[i * dim_ + j];
  return e;
}

double DispersionMatrix::form(const Mode& x, const Mode& y) const {
  double s = 0;
  for (int i = 0; i < dim_; ++i) {
    double row = 0;
    for (int j = 0; j < dim_; ++j) row += a_[i * dim_ + j] * double(y[j]);
    s += double(x[i]) * row;
  }
  return s;
}

bool DispersionMatrix::operator==(const DispersionMatrix& o) const {
  if (dim_ != o.dim_) return false;
  for (int i = 0; i < dim_ * dim_; ++i)
    if (a_[i] != o.a_[i]) return false;
  return true;
}

double resonant_value(const DispersionMatrix& A, const Quadruple& q) {
  return A.eigenvalue_sq(q.n1) - A.eigenvalue_sq(q.n2) + A.eigenvalue_sq(q.n3) -
         A.eigenvalue_sq(q.n);
}

double factored_resonant_value(const DispersionMatrix& A, const Quadruple& q) {
  if (!zero_momentum(q))
    throw std::invalid_argument("factored_resonant_value: quadruple momentum is nonzero");
  return 2.0 * A.form(sub(q.n1, q.n2), sub(q.n2, q.n3));
}

double regularity_threshold(double tau, double c_d, int dim) {
  if (!(tau > 0)) throw std::invalid_argument("regularity_threshold: tau must be positive");
  if (!(c_d > 0) || c_d > 2)
    throw std::invalid_argument("regularity_threshold: c_d must lie in (0, 2]");
  if (dim != 2 && dim != 3) throw std::invalid_argument("regularity_threshold: dim must be 2 or 3");
  return 0.5 * dim + 4.0 * tau / c_d;
}

ModeBall::ModeBall(int dim, int radius) : dim_(dim), radius_(radius), side_(2 * radius + 1) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("mode ball: dim must be 2 or 3");
  if (radius < 0) throw std::invalid_argument("mode ball: radius must be >= 0");
  std::int64_t r2 = std::int64_t(radius) * radius;
  for (int c0 = -radius; c0 <= radius; ++c0)
    for (int c1 = -radius; c1 <= radius; ++c1) {
      if (dim == 2) {
        Mode m{c0, c1, 0};
        if (norm2(m) <= r2) modes_.push_back(m);
      } else {
        for (int c2 = -radius; c2 <= radius; ++c2) {
          Mode m{c0, c1, c2};
          if (norm2(m) <= r2) modes_.push_back(m);
        }
      }
    }
  std::sort(modes_.begin(), modes_.end(), [](const Mode& a, const Mode& b) {
    std::int64_t na = norm2(a), nb = norm2(b);
    if (na != nb) return na < nb;
    return a < b;
  });
  std::size_t cells = 1;
  for (int i = 0; i < dim_; ++i) cells *= std::size_t(side_);
  lut_.assign(cells, -1);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const Mode& m = modes_[i];
    std::size_t idx = 0;
    for (int k = dim_ - 1; k >= 0; --k) idx = idx * side_ + std::size_t(m[k] + radius_);
    lut_[idx] = std::int32_t(i);
  }
}

int ModeBall::index(const Mode& m) const {
  for (int i = dim_; i < kMaxDim; ++i)
    if (m[i] != 0) return -1;
  std::size_t idx = 0;
  for (int k = dim_ - 1; k >= 0; --k) {
    if (m[k] < -radius_ || m[k] > radius_) return -1;
    idx = idx * side_ + std::size_t(m[k] + radius_);
  }
  return lut_[idx];
}

AdmissibilityReport scan_admissibility(const DispersionMatrix& A, double tau, int radius) {
  if (!(tau > 0)) throw std::invalid_argument("admissibility scan: tau must be positive");
  if (radius < 1) throw std::invalid_argument("admissibility scan: radius must be >= 1");

  // |a^T A b| |a|^tau |b|^tau is invariant under a -> -a, b -> -b and under
  // swapping a and b (A symmetric), so scanning lex-positive pairs i <= j
  // covers every nonzero pair.
  ModeBall ball(A.dim(), radius);
  std::vector<Mode> reps;
  reps.reserve(ball.size() / 2);
  for (const Mode& m : ball.modes())
    if (lex_positive(m)) reps.push_back(m);

  std::vector<double> pw(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) pw[i] = std::pow(norm(reps[i]), tau);

  AdmissibilityReport rep;
  rep.tau = tau;
  rep.radius = radius;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  for (std::size_t j = 0; j < reps.size(); ++j) {
    const Mode& b = reps[j];
    double w[kMaxDim] = {0, 0, 0};
    for (int r = 0; r < A.dim(); ++r) {
      double s = 0;
      for (int c = 0; c < A.dim(); ++c) s += A.entry(r, c) * double(b[c]);
      w[r] = s;
    }
    double pwj = pw[j];
    for (std::size_t i = 0; i <= j; ++i) {
      const Mode& a = reps[i];
      double dot = a[0] * w[0] + a[1] * w[1] + a[2] * w[2];
      double v = std::fabs(dot) * pw[i] * pwj;
      if (v < best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
  rep.constant = best;
  rep.witness_a = reps[bi];
  rep.witness_b = reps[bj];
  return rep;
}

double certified_resonance_tolerance(const DispersionMatrix& A, double tau, int radius,
                                     double cap) {
  // Nonzero Omega on ball(radius) interactions factors as 2 a^T A b with
  // 0 < |a|, |b| <= 2*radius, so |Omega| >= 2 c_{2R} / (2R)^{2 tau}.
  AdmissibilityReport rep = scan_admissibility(A, tau, 2 * radius);
  if (!rep.positive()) return 0.0;
  double bound = 2.0 * rep.constant / std::pow(2.0 * radius, 2.0 * tau);
  return std::min(cap, 0.5 * bound);
}

}  // namespace diowave
