#pragma once

#include <stdexcept>

namespace sgflm {

/// Input data that fails validation (malformed files, inconsistent shapes).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure that could not produce a usable answer
/// (non-convergence, singular or ill-conditioned matrices).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sgflm
