#pragma once

#include <stdexcept>
#include <string>

namespace dreamif {

// Base for all library-specific failures. Argument/precondition violations
// use std::invalid_argument directly.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / OS level failure (open, read, write, rename, fsync).
struct IoError : Error {
    using Error::Error;
};

// Payload is structurally not what it claims to be (bad magic, bad PNG,
// malformed JSON, mismatched dataset entry).
struct FormatError : Error {
    using Error::Error;
};

// Recognized container but unsupported format revision.
struct VersionError : Error {
    using Error::Error;
};

// Container is the right format/version but internally inconsistent
// (truncated payload, missing or mismatched keys).
struct CorruptionError : Error {
    using Error::Error;
};

// Numeric breakdown at runtime (non-finite training loss).
struct NumericError : Error {
    using Error::Error;
};

// Dataset resolved to zero usable pairs.
struct EmptyDatasetError : Error {
    using Error::Error;
};

}  // namespace dreamif
