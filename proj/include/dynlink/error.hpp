#pragma once

#include <stdexcept>
#include <string>

namespace dynlink {

// Base for all library errors. Subclasses let the CLI map failures to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or schema violation.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A pipeline stage was asked to run before the stage it depends on.
class DependencyError : public Error {
public:
    using Error::Error;
};

// Unreadable, truncated or wrong-version binary artifact.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace dynlink
