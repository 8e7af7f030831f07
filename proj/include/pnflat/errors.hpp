#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnflat {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside the set where the quantity is defined (kernel at 0, k = 0, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConfigurationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    double residual;
    std::vector<double> history;
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return buf;
    }
    NumericalError(const std::string& what, double res, std::vector<double> hist = {})
        : std::runtime_error(what + " (residual " + fmt(res) + ")"),
          residual(res), history(std::move(hist)) {}
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pnflat
