#pragma once

#include <stdexcept>
#include <string>

namespace kgw {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shapes or space identities do not line up.
struct StructuralError : Error {
  using Error::Error;
};

// Exact and floating data mixed in one operation.
struct ModeMismatchError : Error {
  using Error::Error;
};

// Compact support requirement violated (margin or region).
struct SupportError : Error {
  using Error::Error;
};

struct InvalidPointError : Error {
  using Error::Error;
};

struct InvalidStateError : Error {
  using Error::Error;
};

struct UnsupportedSpaceError : Error {
  using Error::Error;
};

// No admissible slab between margin and perturbation, or a perturbed metric
// fails the construction checks.
struct GeometryError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

// Bad CLI/config input; message names the offending field.
struct UsageError : Error {
  using Error::Error;
};

}  // namespace kgw
