#pragma once

#include <stdexcept>

namespace bvae {

/// Invalid or missing configuration (bad key, missing directory, empty split).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be decoded or parsed.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or directory that cannot be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation called in a state that does not support it (e.g. scoring an untrained model).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace bvae
