#pragma once

#include <stdexcept>
#include <string>

namespace efpqubo {

// Bad argument values (negative lambda, empty ranges, length mismatches).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input files; message carries the line number when known.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration or dense diagonalization asked to go too big.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

// Input data violates a documented precondition (e.g. relation restriction).
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ParameterError(what);
}

}  // namespace efpqubo
