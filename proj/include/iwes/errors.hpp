#pragma once

#include <stdexcept>
#include <string>

namespace iwes {

// Bad arguments or malformed inputs (maps to CLI exit code 1).
class InvalidInputError : public std::invalid_argument {
public:
  explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Training produced a non-finite loss (maps to CLI exit code 2).
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Fewer than the minimum number of trials survived aggregation (exit code 2).
class AggregateError : public std::runtime_error {
public:
  explicit AggregateError(const std::string& what) : std::runtime_error(what) {}
};

// A state the algorithm's invariants rule out was reached anyway.
class InternalError : public std::logic_error {
public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace iwes
