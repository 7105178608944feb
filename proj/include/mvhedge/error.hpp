#ifndef MVHEDGE_ERROR_HPP
#define MVHEDGE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mvhedge {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed tree structure (duplicate ids, unknown parents, several roots, cycles).
class TreeStructureError : public Error {
 public:
  using Error::Error;
};

/// The tree admits arbitrage, so no (signed) martingale measure exists.
class ArbitrageError : public Error {
 public:
  using Error::Error;
};

/// A precondition on user-supplied inputs was not met.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An internal consistency check failed. Always a bug.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvhedge

#endif  // MVHEDGE_ERROR_HPP
