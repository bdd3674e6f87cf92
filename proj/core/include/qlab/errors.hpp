#pragma once

#include <stdexcept>
#include <string>

namespace qlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nearest-point projection onto the vacuum manifold is undefined (λ₁ ≈ λ₂).
class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

/// A ball contains no grid node.
class EmptyIntersection : public Error {
public:
    using Error::Error;
};

/// A radius is below what the grid can resolve.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteEnergy : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// Bad or inconsistent configuration; `key()` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace qlab
