#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fluidest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grid shapes that do not match, or are too small for a stencil.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter values (negative diffusion, bad order, unknown keys...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures, reported with the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Numerical failures: CFL violations, solver non-convergence, non-finite losses.
class NumericalError : public Error {
public:
    using Error::Error;
};

class CflError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, int iterations, double residual)
        : NumericalError(what), iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

}  // namespace fluidest
