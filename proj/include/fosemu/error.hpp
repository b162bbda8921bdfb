#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fosemu {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain model parameters, bad indices.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Input data that fails validation. Carries every violation found, not only the first.
class DataValidationError : public Error {
public:
    explicit DataValidationError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Factorization or other numerical failure; the message names the matrix involved.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace fosemu
