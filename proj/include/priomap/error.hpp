// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace priomap {

/// Base of every error raised by the library. `kind()` is a short stable tag
/// used in the CLI's machine-readable error output.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed or inconsistent configuration (zoo, platform, script files).
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// Shapes or slot counts that do not line up between two inputs.
class StructuralError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "structural"; }
};

/// A precondition on an argument value was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

/// Scenario script errors carry the offending event index.
class ScriptError : public Error {
public:
    ScriptError(std::size_t event_index, const std::string& what)
        : Error("event " + std::to_string(event_index) + ": " + what), event_index_(event_index) {}
    const char* kind() const noexcept override { return "script"; }
    std::size_t event_index() const noexcept { return event_index_; }

private:
    std::size_t event_index_;
};

}  // namespace priomap
