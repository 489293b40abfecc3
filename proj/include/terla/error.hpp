#pragma once

#include <stdexcept>
#include <string>

namespace terla {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Configuration or topology file is malformed or violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Graph does not match the node/edge schema the encoder was built for.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// A simulation or training step could not proceed (non-finite loss, bad state).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace terla
