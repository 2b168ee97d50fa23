#pragma once

#include <stdexcept>
#include <string>

namespace dfeia {

// Structural problems detected while wiring shapes together (bad kernel/group
// combinations, invalid network configs, mismatched extents). Raised at build
// or call time, never silently ignored.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: backward on an untaped value, labels out of range, optimizer
// state that does not match the parameter set.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset / image ingestion failures. The message names the offending file.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Weight-file load failures, one kind per failure mode so callers and tests
// can tell them apart.
class LoadError : public std::runtime_error {
 public:
  enum class Kind {
    bad_magic,
    bad_version,
    unknown_name,
    missing_tensor,
    shape_mismatch,
    unexpected_eof,
    io,
  };

  LoadError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace dfeia
