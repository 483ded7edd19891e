#pragma once

#include <stdexcept>
#include <string>

namespace csd {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement, including chunk-divisibility violations.
struct ShapeError : Error {
    using Error::Error;
};

// An index outside its valid range; the message names the offending value.
struct IndexError : Error {
    using Error::Error;
};

// Non-finite input or an undefined statistic (e.g. zero-variance R^2).
struct NumericError : Error {
    using Error::Error;
};

// Operation invoked in a state it does not support (e.g. sparse step before
// any dense step initialized the cache).
struct StateError : Error {
    using Error::Error;
};

// Parameter outside its documented range (e.g. top-k count).
struct ValueError : Error {
    using Error::Error;
};

// Invalid model/schedule configuration or config-file contents.
struct ConfigError : Error {
    using Error::Error;
};

// File format violations (bad magic, truncated payload).
struct IoError : Error {
    using Error::Error;
};

}  // namespace csd
