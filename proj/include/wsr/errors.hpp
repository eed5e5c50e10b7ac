#pragma once

#include <stdexcept>
#include <string>

namespace wsr {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// PDE operator could not be factorized (e.g. pure Neumann Laplacian, or a
// negative shift hitting an eigenvalue).
struct SingularOperator : Error {
  using Error::Error;
};

struct IncompatibleGrids : Error {
  using Error::Error;
};

// Requested truncation index exceeds the numerical rank.
struct RankDeficient : Error {
  using Error::Error;
};

// Selected columns are numerically linearly dependent.
struct DependentColumns : Error {
  using Error::Error;
};

// A basis vector lies (numerically) in the null space of C, so its weight
// would be zero.
struct ZeroColumn : Error {
  int column;
  ZeroColumn(int col, const std::string& msg) : Error(msg), column(col) {}
};

struct AlphaTooLarge : Error {
  using Error::Error;
};

// Two candidate maximizers coincide to working precision; the non-parallelism
// assumption on the columns of C fails at this tolerance.
struct AssumptionViolated : Error {
  using Error::Error;
};

struct SingularGram : Error {
  using Error::Error;
};

struct NotOrthogonal : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct ZeroData : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace wsr
