// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hbrb {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated (empty input, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Descriptors of different widths were mixed.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (k < 2 for training, bad probability, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// k-means++ seeding asked for more centroids than there are points.
class InsufficientPointsError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. `line` is 0 for binary formats.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A structural invariant of a library object does not hold.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace hbrb
