#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace spice {

// 17 significant digits: round-trips any finite double exactly. Infinities
// come out as "inf"/"-inf" so callers can store them in JSON strings.
inline std::string fmt17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse17(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace spice
