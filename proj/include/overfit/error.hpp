#pragma once

#include <stdexcept>
#include <string>

namespace overfit {

// Bad inputs: dimension mismatches, invariant violations, missing files.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Singular systems, failed factorizations, root-finding failures.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Series or iteration that ran out of budget; carries the last partial value.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double partial_value, int iterations)
        : NumericalError(what), partial_value_(partial_value), iterations_(iterations) {}

    double partial_value() const noexcept { return partial_value_; }
    int iterations() const noexcept { return iterations_; }

private:
    double partial_value_;
    int iterations_;
};

}  // namespace overfit
