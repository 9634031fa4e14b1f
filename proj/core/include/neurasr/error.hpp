#pragma once

#include <stdexcept>
#include <string>

namespace neurasr {

// All library failures derive from Error so callers (the CLI in particular)
// can catch one type and still dispatch on the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unreadable corpus files.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// A file exists but its content violates the expected layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Caller passed an out-of-contract argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Data values are unusable (non-finite samples, too-short signals).
class InputError : public Error {
 public:
  using Error::Error;
};

// Filter design could not produce a stable cascade.
class DesignError : public Error {
 public:
  using Error::Error;
};

// Object used in the wrong lifecycle state (e.g. a consumed tape).
class StateError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration is inconsistent with itself or the corpus.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace neurasr
