#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace scm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base of every error raised by the library. `kind()` names the error class
/// so that front ends can report it without RTTI games.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Invalid arguments or configuration (bad dt, horizon not containing 0, ...).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

/// A numerical computation refused to produce a result: non-contraction,
/// blow-up, rank collapse, ill-conditioned frames and so on.
class NumericalRefusal : public Error {
public:
    NumericalRefusal(std::string kind, const std::string& what) : Error(std::move(kind), what) {}
};

} // namespace scm
