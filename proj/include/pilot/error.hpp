#pragma once

#include <stdexcept>
#include <string>

namespace pilot {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A computation produced or consumed a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed caller input (NaN actions, non-contiguous trajectories, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Operation invoked on an object in the wrong state (e.g. sampling an empty buffer).
class StateError : public Error {
 public:
  using Error::Error;
};

// A cross-component precondition was violated (stale inverse dynamics, goal-dim mismatch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or snapshot could not be read back.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace pilot
