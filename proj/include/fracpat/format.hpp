#pragma once

#include <cstdio>
#include <string>

namespace fracpat {

/// Text that parses back to the identical double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fracpat
