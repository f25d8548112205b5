#pragma once

#include <stdexcept>
#include <string>

namespace brw {

enum class ErrorKind {
  validation,      // bad input value, unknown key, range violation
  parse,           // malformed configuration text
  degenerate,      // degenerate law or sample (zero variance, m(lambda) = 0)
  no_root,         // root bracket without a sign change
  cap_exceeded,    // simulation would exceed the node budget
  too_few_samples,
  lattice_law,     // group analysis refuses lattice displacement laws
  precondition,    // caller violated an operation precondition
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::no_root: return "no-root";
    case ErrorKind::cap_exceeded: return "cap-exceeded";
    case ErrorKind::too_few_samples: return "too-few-samples";
    case ErrorKind::lattice_law: return "lattice-law";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace brw
