#pragma once

#include <stdexcept>
#include <string>

namespace vortexiter {

// Bad arguments, shape mismatches, violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed files (bad magic, truncated body, ...).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Blow-up, NaN, mass drift. The CLI maps these to exit code 1.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CflViolation : public InvalidArgument {
public:
    CflViolation(double dt, double required)
        : InvalidArgument("CFL violation: dt=" + std::to_string(dt) +
                          " exceeds the advective limit; use dt <= " + std::to_string(required)),
          dt_(dt), required_(required) {}
    double dt() const { return dt_; }
    double required_dt() const { return required_; }

private:
    double dt_;
    double required_;
};

}  // namespace vortexiter
