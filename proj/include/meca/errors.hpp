#pragma once

#include <stdexcept>
#include <string>

namespace meca {

// Invalid model/config/shape combination. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A file could not be read or did not match its declared format.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure while running an experiment (divergence, empty selections, ...).
// Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace meca
