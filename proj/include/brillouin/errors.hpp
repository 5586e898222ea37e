#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace brillouin {

// Base for every error raised by the toolkit. The CLI maps subclasses onto
// its exit-code contract (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user input: bad parameters, malformed files, missing fields.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A physically meaningless operating point, e.g. a blue-detuned pump past the
// parametric instability threshold (gamma_eff <= 0).
class InstabilityError : public Error {
public:
    InstabilityError(const std::string& what, double gamma_eff)
        : Error(what), gamma_eff_(gamma_eff) {}
    double gamma_eff() const noexcept { return gamma_eff_; }

private:
    double gamma_eff_;
};

// Not enough usable samples for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Nonlinear least squares failures.
class FitError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public FitError {
public:
    using FitError::FitError;
};

class SingularJacobianError : public FitError {
public:
    using FitError::FitError;
};

// The fit window holds nothing distinguishable from the background model.
class NoFeatureError : public FitError {
public:
    using FitError::FitError;
};

// Quartic steady-state solve with no root inside the physical interval.
class NoAdmissibleRootError : public Error {
public:
    NoAdmissibleRootError(const std::string& what, std::vector<double> real_roots)
        : Error(what), real_roots_(std::move(real_roots)) {}
    const std::vector<double>& real_roots() const noexcept { return real_roots_; }

private:
    std::vector<double> real_roots_;
};

// Resonance tracking lost its mode across a parameter sweep.
class TrackingError : public Error {
public:
    using Error::Error;
};

}  // namespace brillouin
