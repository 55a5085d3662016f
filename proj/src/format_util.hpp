#pragma once

#include <cstdio>
#include <string>

namespace dco {

/// Scientific notation with 17 significant digits, enough to round-trip a
/// double through text exactly.
inline std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

}  // namespace dco
