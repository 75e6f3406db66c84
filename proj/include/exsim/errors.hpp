#pragma once

#include <stdexcept>
#include <string>

namespace exsim {

// Error categories map one-to-one onto CLI exit codes (2/3/4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Out-of-domain argument to a closed-form function.
struct DomainError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace exsim
