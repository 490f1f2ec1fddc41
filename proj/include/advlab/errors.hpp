#pragma once

#include <stdexcept>
#include <string>

namespace advlab {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 3, MissingInputError -> 2, everything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad option value, unknown identifier, malformed config field.
struct ConfigError : Error {
  using Error::Error;
};

// A prerequisite file (dataset, checkpoint, attack set) is absent.
struct MissingInputError : Error {
  using Error::Error;
};

// Present but corrupt or inconsistent data; message names the record.
struct ValidationError : Error {
  using Error::Error;
};

// Stored checksum does not match the bytes on disk.
struct IntegrityError : Error {
  using Error::Error;
};

// Container format version this build cannot read.
struct VersionError : Error {
  using Error::Error;
};

// NaN/Inf surfaced where a finite value is required (diverged training,
// degenerate attack gradients).
struct NumericsError : Error {
  using Error::Error;
};

}  // namespace advlab
