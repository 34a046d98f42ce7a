#pragma once

#include <stdexcept>
#include <string>

namespace stnav {

// Bad input data: malformed files, inconsistent streams, invalid windows.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: singular systems, non-SPD innovation covariance.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration or API usage.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stnav
