#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace nlbvp {

using Complex = std::complex<double>;
using Point = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  Config,     // invalid parameters or inputs
  Geometry,   // a geometric construction cannot satisfy its invariants
  Numerical,  // a numerical procedure failed to converge or is ambiguous
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace nlbvp
