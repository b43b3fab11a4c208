#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace rinverse {

namespace detail {

/// Shortest text form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched jet dimension, order, or base point.
struct ShapeError : Error {
  using Error::Error;
};

/// Argument outside the domain of an analytic kernel.
struct DomainError : Error {
  using Error::Error;
};

/// Expression evaluation hit a singular node; carries the offending subtree.
struct EvaluationError : Error {
  EvaluationError(const std::string& what, std::string subtree_text)
      : Error(what + " in subtree " + subtree_text), subtree(std::move(subtree_text)) {}
  std::string subtree;
};

/// Descriptor failed validation (not a normal set with an admissible surface).
struct DescriptorError : Error {
  using Error::Error;
};

/// Adaptive quadrature could not reach the requested tolerance.
struct QuadratureError : Error {
  QuadratureError(const std::string& what, double achieved_estimate)
      : Error(what), achieved(achieved_estimate) {}
  double achieved;
};

/// Jet order too low for the requested operation.
struct InsufficientOrderError : Error {
  using Error::Error;
};

/// Point does not decompose as base + t*direction for the descriptor.
struct OutsideSetError : Error {
  using Error::Error;
};

/// Root finder or other iteration failed to converge.
struct NumericError : Error {
  using Error::Error;
};

/// Malformed scenario or configuration input.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace rinverse
