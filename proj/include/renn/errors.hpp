#pragma once

#include <stdexcept>
#include <string>

namespace renn {

// Invalid configuration or a shape mismatch between an operation and its input.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API contract violation: missing cache, wrong mode, unmet precondition.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// File-level I/O failure (missing file, unwritable directory).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed CSV content (bad header, field count, unparsable value).
struct CsvError : IoError {
    using IoError::IoError;
};

// Sample/label sequence out of order.
struct LabelError : IoError {
    using IoError::IoError;
};

// Sampling rate disagrees with what the caller expects.
struct FsMismatchError : IoError {
    using IoError::IoError;
};

// Stored checksum does not match the file contents (covers truncation).
struct ChecksumError : IoError {
    using IoError::IoError;
};

// Unrecognized magic or unsupported format version.
struct VersionError : IoError {
    using IoError::IoError;
};

// Stored model shape differs from the expected one.
struct ConfigMismatchError : IoError {
    using IoError::IoError;
};

}  // namespace renn
