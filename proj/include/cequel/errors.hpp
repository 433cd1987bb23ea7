#pragma once

#include <stdexcept>
#include <string>

namespace cequel {

/// Bad input: malformed files, inconsistent dimensions, out-of-range
/// parameters. Maps to process exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// I/O or network failure while talking to an oracle backend or reading a
/// required artifact. Maps to process exit code 2.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: eigensolver breakdown, residuals out of tolerance.
/// Maps to process exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cequel
