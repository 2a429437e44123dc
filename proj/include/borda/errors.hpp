#pragma once

#include <stdexcept>
#include <string>

namespace borda {

/// Invalid user input: bad dimensions, out-of-range parameters, malformed config.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown (e.g. a Gram factorization that fails after jitter escalation).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure, annotated with the offending path.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace borda
