/**
 * @file error.hpp
 * @brief Exception types shared by every anisokpp module.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace anisokpp {

/// Base class of every library error; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or range mismatch in caller-supplied arguments.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class InvalidNormError : public Error {
 public:
  using Error::Error;
};

/// Domain without a Dirichlet piece (no Poincare inequality) or malformed labels.
class InvalidDomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Weight whose positive part vanishes on the free nodes.
class InfeasibleWeightError : public Error {
 public:
  using Error::Error;
};

/// Inner linear/nonlinear solve or time step could not be completed.
class SolverError : public Error {
 public:
  using Error::Error;
};

class OracleFailure : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimensionError : public Error {
 public:
  using Error::Error;
};

/// No sub-solution scale epsilon in [1e-12, 1] satisfies the bracket inequality.
class DegenerateBracketError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace anisokpp
