#pragma once

#include <stdexcept>
#include <string>

namespace wavefarm {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent data file / dataset.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or unknown configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Frequency-domain system matrix is (numerically) singular.
class SingularityError : public std::runtime_error {
public:
    SingularityError(const std::string& what, double omega)
        : std::runtime_error(what), omega_(omega) {}
    double omega() const noexcept { return omega_; }

private:
    double omega_;
};

/// Network training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wavefarm
