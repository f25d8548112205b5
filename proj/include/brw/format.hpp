#pragma once

// Round-trip number formatting shared by the CSV, report and config writers.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

#include "brw/error.hpp"
#include "brw/model.hpp"

namespace brw {

/// 17 significant digits: parsing the text gives back the same double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_complex(cplx z) {
  std::string s = fmt17(z.real());
  const std::string im = fmt17(z.imag());
  s += (im.front() == '-' || im.front() == '+') ? im : "+" + im;
  return s + "i";
}

/// Strict decimal parse of the whole string (exponent notation allowed).
inline double parse_double(std::string_view text, const std::string& what) {
  const std::string s(text);
  if (s.empty()) throw Error(ErrorKind::parse, what + ": empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(ErrorKind::parse, what + ": not a number: '" + s + "'");
  return v;
}

}  // namespace brw
