#pragma once
// Deterministic random helpers. The engine is std::mt19937_64 with documented
// seeds; all distribution transforms are written out here because the standard
// library's distributions are implementation-defined and would break
// reproducible fixtures across toolchains.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace diowave {

inline double uniform_double(std::mt19937_64& g) {
  // 53 mantissa bits, uniform in [0, 1).
  return double(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(g);
}

// Modulo draw; bias is < n / 2^64 and immaterial for sampling work here.
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
  return g() % n;
}

inline int uniform_int_range(std::mt19937_64& g, int lo, int hi) {
  return lo + int(uniform_index(g, std::uint64_t(hi - lo + 1)));
}

// Box-Muller, one value per call (no cached spare, keeps streams simple).
inline double normal_double(std::mt19937_64& g) {
  double u = 0;
  do { u = uniform_double(g); } while (u == 0.0);
  double v = uniform_double(g);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
}

inline std::complex<double> normal_complex(std::mt19937_64& g) {
  double re = normal_double(g);
  double im = normal_double(g);
  return {re, im};
}

}  // namespace diowave
