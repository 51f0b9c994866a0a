#pragma once
// Deterministic numeric formatting shared by every CSV writer.

#include <cstdio>
#include <string>

namespace diowave {

// Round-trip decimal form; identical bytes for identical doubles.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace diowave
