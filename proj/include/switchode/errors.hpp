#pragma once

#include <stdexcept>
#include <string>

namespace switchode {

// Invalid arguments, malformed shapes, inconsistent dimensions.
struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or inconsistent input data (files, matrices failing validation).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Generator matrix failing validation (signs, row sums).
struct InvalidRateMatrix : DataError {
    explicit InvalidRateMatrix(const std::string& msg) : DataError(msg) {}
};

// Generator whose positive-rate graph is not strongly connected.
struct IrreducibilityError : DataError {
    explicit IrreducibilityError(const std::string& msg) : DataError(msg) {}
};

// Numerical failures: divergence, degenerate statistics, impossible events.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Conditioning event has (numerically) zero probability.
struct NullEventError : NumericalError {
    explicit NullEventError(const std::string& msg) : NumericalError(msg) {}
};

// ODE state escaped the guard bound during integration.
struct DivergenceError : NumericalError {
    explicit DivergenceError(const std::string& msg) : NumericalError(msg) {}
};

// A latent state received (numerically) zero posterior mass or dwell time.
struct DegenerateStateError : NumericalError {
    explicit DegenerateStateError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace switchode
