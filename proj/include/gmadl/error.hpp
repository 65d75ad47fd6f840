#pragma once

#include <stdexcept>
#include <string>

namespace gmadl {

// Bad arguments or configuration: lengths, ranges, parameters.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data that violates a series invariant (unparseable rows, non-positive
// prices, non-increasing timestamps).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during training (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gmadl
